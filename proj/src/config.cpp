#include "greyreid/config.hpp"

#include <fstream>

#include "greyreid/errors.hpp"

namespace greyreid {

namespace {

using Json = nlohmann::json;

void merge_checked(Json& base, const Json& patch, const std::string& where) {
  if (!patch.is_object()) throw ConfigError("config section '" + where + "' must be an object");
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string key = where.empty() ? it.key() : where + "." + it.key();
    if (!base.contains(it.key())) throw ConfigError("unknown config key '" + key + "'");
    Json& slot = base[it.key()];
    if (slot.is_object()) {
      merge_checked(slot, it.value(), key);
    } else {
      const bool numeric_ok = slot.is_number() && it.value().is_number();
      const bool nullable = slot.is_null() || it.value().is_null();
      if (!numeric_ok && !nullable && slot.type() != it.value().type()) {
        throw ConfigError("config key '" + key + "' expects " + std::string(slot.type_name()) + ", got " +
                          std::string(it.value().type_name()));
      }
      slot = it.value();
    }
  }
}

template <typename T>
T read(const Json& root, const char* section, const char* key) {
  try {
    return root.at(section).at(key).get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("bad config value ") + section + "." + key + ": " + e.what());
  }
}

}  // namespace

RunConfig::RunConfig() : root_(defaults()) {}

Json RunConfig::defaults() {
  return {
      {"seed", 0},
      {"data", {{"manifest", ""}, {"market_root", ""}}},
      {"network",
       {{"backbone", "standard-50"},
        {"dim_grey", 256},
        {"dim_rgb", 512},
        {"dim_joint", 512},
        {"n_parts", 2},
        {"fusion", "plus"},
        {"final_stride_one", true},
        {"bn_neck", false},
        {"toy_channels", 64}}},
      {"loss",
       {{"lambda", 1.0},
        {"margin", 0.3},
        {"triplet_reduction", "mean"},
        {"branch_weights", {{"grey", 1.0}, {"rgb", 1.0}, {"joint", 1.0}, {"global", 1.0}}}}},
      {"train",
       {{"epochs", 300},
        {"lr_schedule", Json::array({Json::array({0, 0.01}), Json::array({100, 0.001}), Json::array({200, 0.0001})})},
        {"momentum", 0.9},
        {"weight_decay", 5e-4},
        {"P", 32},
        {"K", 4},
        {"checkpoint_every", 0},
        {"workers", 1},
        {"pretrained", ""}}},
      {"augment",
       {{"height", 384},
        {"width", 128},
        {"flip_prob", 0.5},
        {"erase", true},
        {"erase_prob", 0.5},
        {"erase_area", Json::array({0.02, 0.4})},
        {"erase_aspect", Json::array({0.3, 3.33})},
        {"erase_attempts", 100},
        {"mean", nullptr},
        {"std", nullptr},
        {"grey_weights", "luma"}}},
      {"eval", {{"max_rank", 50}, {"batch_size", 16}, {"l2_normalize", false}}},
  };
}

void RunConfig::merge_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  Json patch;
  try {
    patch = Json::parse(in, nullptr, true, true);
  } catch (const Json::exception& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  merge(patch);
}

void RunConfig::merge(const Json& patch) { merge_checked(root_, patch, ""); }

void RunConfig::set(const std::string& key, const std::string& value) {
  Json parsed;
  try {
    parsed = Json::parse(value);
  } catch (const Json::exception&) {
    parsed = value;
  }
  Json patch = parsed;
  std::string rest = key;
  std::vector<std::string> parts;
  for (std::size_t pos; (pos = rest.find('.')) != std::string::npos; rest = rest.substr(pos + 1)) {
    parts.push_back(rest.substr(0, pos));
  }
  parts.push_back(rest);
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) {
    if (it->empty()) throw ConfigError("malformed config key '" + key + "'");
    patch = Json{{*it, patch}};
  }
  merge(patch);
}

void RunConfig::set_assignment(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("expected key=value, got '" + assignment + "'");
  set(assignment.substr(0, eq), assignment.substr(eq + 1));
}

std::uint64_t RunConfig::seed() const {
  try {
    return root_.at("seed").get<std::uint64_t>();
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("bad seed: ") + e.what());
  }
}

NetworkConfig RunConfig::network() const {
  NetworkConfig c;
  c.backbone = parse_backbone(read<std::string>(root_, "network", "backbone"));
  c.dim_grey = read<int>(root_, "network", "dim_grey");
  c.dim_rgb = read<int>(root_, "network", "dim_rgb");
  c.dim_joint = read<int>(root_, "network", "dim_joint");
  c.n_parts = read<int>(root_, "network", "n_parts");
  c.fusion = parse_fusion(read<std::string>(root_, "network", "fusion"));
  c.final_stride_one = read<bool>(root_, "network", "final_stride_one");
  c.bn_neck = read<bool>(root_, "network", "bn_neck");
  c.toy_channels = read<int>(root_, "network", "toy_channels");
  return c;
}

LossConfig RunConfig::loss() const {
  LossConfig c;
  try {
    from_json(root_.at("loss"), c);
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("bad loss config: ") + e.what());
  }
  c.validate();
  return c;
}

AugmentConfig RunConfig::augment() const {
  const bool toy = network().backbone == BackboneKind::kToyCnn;
  AugmentConfig c = toy ? AugmentConfig::toy() : AugmentConfig::imagenet();
  c.height = read<int>(root_, "augment", "height");
  c.width = read<int>(root_, "augment", "width");
  c.flip_prob = read<double>(root_, "augment", "flip_prob");
  c.erase = read<bool>(root_, "augment", "erase");
  c.erase_prob = read<double>(root_, "augment", "erase_prob");
  const auto area = read<std::array<double, 2>>(root_, "augment", "erase_area");
  const auto aspect = read<std::array<double, 2>>(root_, "augment", "erase_aspect");
  c.erase_area_min = area[0];
  c.erase_area_max = area[1];
  c.erase_aspect_min = aspect[0];
  c.erase_aspect_max = aspect[1];
  c.erase_attempts = read<int>(root_, "augment", "erase_attempts");
  if (!root_.at("augment").at("mean").is_null()) c.mean = read<std::array<float, 3>>(root_, "augment", "mean");
  if (!root_.at("augment").at("std").is_null()) c.std = read<std::array<float, 3>>(root_, "augment", "std");
  const auto grey = read<std::string>(root_, "augment", "grey_weights");
  if (grey == "luma") {
    c.grey = GreyWeights::luma();
  } else if (grey == "average") {
    c.grey = GreyWeights::average();
  } else {
    throw ConfigError("augment.grey_weights must be luma or average");
  }
  if (c.height < 16 || c.width < 16) throw ConfigError("augment.height/width too small");
  if (area[0] <= 0 || area[0] > area[1] || area[1] >= 1) throw ConfigError("augment.erase_area must satisfy 0 < lo <= hi < 1");
  if (aspect[0] <= 0 || aspect[0] > aspect[1]) throw ConfigError("augment.erase_aspect must satisfy 0 < lo <= hi");
  for (float s : c.std) {
    if (!(s > 0)) throw ConfigError("augment.std must be positive");
  }
  return c;
}

TrainConfig RunConfig::train() const {
  TrainConfig c;
  c.epochs = read<int>(root_, "train", "epochs");
  c.lr_schedule.clear();
  try {
    for (const auto& entry : root_.at("train").at("lr_schedule")) {
      c.lr_schedule.emplace_back(entry.at(0).get<int>(), entry.at(1).get<double>());
    }
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("train.lr_schedule must be [[epoch, lr], ...]: ") + e.what());
  }
  c.momentum = read<double>(root_, "train", "momentum");
  c.weight_decay = read<double>(root_, "train", "weight_decay");
  c.P = read<int>(root_, "train", "P");
  c.K = read<int>(root_, "train", "K");
  c.checkpoint_every = read<int>(root_, "train", "checkpoint_every");
  c.workers = read<int>(root_, "train", "workers");
  c.pretrained = read<std::string>(root_, "train", "pretrained");
  c.seed = seed();
  c.loss = loss();
  c.augment = augment();
  c.validate();
  return c;
}

EvalProtocol RunConfig::eval() const {
  EvalProtocol p;
  p.max_rank = read<int>(root_, "eval", "max_rank");
  if (p.max_rank < 1) throw ConfigError("eval.max_rank must be positive");
  return p;
}

ExtractOptions RunConfig::extract() const {
  ExtractOptions o;
  o.batch_size = read<int>(root_, "eval", "batch_size");
  o.l2_normalize = read<bool>(root_, "eval", "l2_normalize");
  if (o.batch_size < 1) throw ConfigError("eval.batch_size must be positive");
  return o;
}

void RunConfig::write_to(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "resolved_config.json");
  if (!out) throw DataError("cannot write " + (dir / "resolved_config.json").string());
  out << dump() << '\n';
}

}  // namespace greyreid
