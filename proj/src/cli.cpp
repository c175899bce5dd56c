#include "greyreid/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "greyreid/checkpoint.hpp"
#include "greyreid/config.hpp"
#include "greyreid/errors.hpp"
#include "greyreid/eval.hpp"
#include "greyreid/feature_io.hpp"
#include "greyreid/greyscale.hpp"
#include "greyreid/image_store.hpp"
#include "greyreid/montage.hpp"
#include "greyreid/toy_dataset.hpp"
#include "greyreid/trainer.hpp"

namespace greyreid::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "JSON config file");
  cmd->add_option("--set", c.sets, "Override a config key: --set loss.lambda=0.5");
  cmd->add_option("--seed", c.seed, "Random seed");
  cmd->add_option("--out", c.out, "Output directory");
  // Unrecognised `--section.key value` pairs are config overrides.
  cmd->allow_extras();
}

RunConfig resolve(const Common& c, const std::vector<std::string>& extras) {
  RunConfig cfg;
  if (!c.config.empty()) cfg.merge_file(c.config);
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& a = extras[i];
    if (a.rfind("--", 0) != 0 || a.size() < 3) throw ConfigError("unexpected argument '" + a + "'");
    std::string key = a.substr(2);
    const auto eq = key.find('=');
    if (eq != std::string::npos) {
      cfg.set(key.substr(0, eq), key.substr(eq + 1));
    } else {
      if (i + 1 >= extras.size()) throw ConfigError("override " + a + " needs a value");
      cfg.set(key, extras[++i]);
    }
  }
  for (const auto& s : c.sets) cfg.set_assignment(s);
  if (c.seed) cfg.set("seed", std::to_string(*c.seed));
  return cfg;
}

DatasetSplit load_split(const RunConfig& cfg) {
  const auto manifest = cfg.json().at("data").at("manifest").get<std::string>();
  const auto root = cfg.json().at("data").at("market_root").get<std::string>();
  if (!manifest.empty()) {
    if (!fs::exists(manifest)) throw DataError("manifest not found: " + manifest);
    return parse_manifest(manifest);
  }
  if (!root.empty()) return ingest_market_directory(root);
  throw DataError("no dataset given; set data.manifest or data.market_root");
}

fs::path require_out(const Common& c, const char* what) {
  if (c.out.empty()) throw ConfigError(std::string("--out is required for ") + what);
  return c.out;
}

// --- prepare-toy -----------------------------------------------------------

struct ToyArgs {
  ToyConfig toy;
  bool no_confound = false;
};

int cmd_prepare_toy(const Common& c, ToyArgs a, std::ostream& out) {
  const fs::path dir = require_out(c, "prepare-toy");
  a.toy.color_confound = !a.no_confound;
  a.toy.validate();
  const std::uint64_t seed = c.seed.value_or(0);
  const DatasetSplit split = generate_toy_dataset(a.toy, seed, dir);
  const json spec = {{"identities", a.toy.identities}, {"images_per_identity", a.toy.images_per_identity},
                     {"cameras", a.toy.cameras},       {"color_confound", a.toy.color_confound},
                     {"height", a.toy.height},         {"width", a.toy.width},
                     {"noise_sigma", a.toy.noise_sigma}, {"seed", seed}};
  std::ofstream(dir / "toy_spec.json") << spec.dump(2) << '\n';
  out << "toy dataset " << spec.dump() << '\n';
  out << "train " << split.train.size() << " query " << split.query.size() << " gallery " << split.gallery.size()
      << " classes " << split.class_index.num_classes() << '\n';
  out << "manifest " << (dir / "manifest.csv").string() << '\n';
  return kExitOk;
}

// --- train -----------------------------------------------------------------

int cmd_train(const Common& c, const std::vector<std::string>& extras, const std::string& resume,
              std::ostream& out, std::ostream& err) {
  const fs::path dir = require_out(c, "train");
  const RunConfig cfg = resolve(c, extras);
  const TrainConfig tc = cfg.train();
  const NetworkConfig nc = cfg.network();
  fs::create_directories(dir);
  cfg.write_to(dir);
  const DatasetSplit split = load_split(cfg);
  for (const auto& w : split.warnings) err << "warning: " << w << '\n';
  Trainer trainer = resume.empty() ? Trainer(tc, nc, split) : Trainer::resume(resume, tc, nc, split);
  trainer.set_output_dir(dir);
  out << "training " << split.train.size() << " images, " << split.class_index.num_classes() << " identities, "
      << tc.epochs << " epochs\n";
  while (trainer.state().epoch < tc.epochs) {
    trainer.run_epoch();
    const auto& s = trainer.state();
    char line[128];
    std::snprintf(line, sizeof(line), "epoch %d loss %.6f lr %g\n", s.epoch, s.epoch_loss.back(), s.step_lr.back());
    out << line << std::flush;
  }
  trainer.save(dir / "final.ckpt");
  out << "checkpoint " << (dir / "final.ckpt").string() << '\n';
  return kExitOk;
}

// --- extract ---------------------------------------------------------------

struct ExtractArgs {
  std::string checkpoint;
  std::string manifest;
  std::string split = "query";
  std::string branch = "global";
  int expect_dim = 0;
};

int cmd_extract(const Common& c, const std::vector<std::string>& extras, const ExtractArgs& a, std::ostream& out) {
  const fs::path dir = require_out(c, "extract");
  RunConfig cfg = resolve(c, extras);
  if (!a.manifest.empty()) cfg.set("data.manifest", json(a.manifest).dump());
  const ExtractOptions opts = cfg.extract();
  const SplitKind kind = parse_split_name(a.split);
  const Branch branch = parse_branch(a.branch);

  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  TwoStreamNet net(ckpt.network);
  restore_model(net, ckpt);
  AugmentConfig aug = ckpt.network.backbone == BackboneKind::kToyCnn ? AugmentConfig::toy() : AugmentConfig{};
  if (ckpt.header.contains("preprocessing")) apply_preprocessing_json(ckpt.header.at("preprocessing"), aug);

  const auto [lo, hi] = branch_columns(ckpt.network, branch);
  if (a.expect_dim > 0 && a.expect_dim != hi - lo) {
    throw ShapeError("branch " + a.branch + " of this checkpoint has dim " + std::to_string(hi - lo) +
                     ", expected " + std::to_string(a.expect_dim));
  }
  const DatasetSplit split = load_split(cfg);
  const auto& records = split.records(kind);
  if (records.empty()) throw DataError("split " + a.split + " is empty");
  ImageStore store;
  const RowMatrixF global = extract_features(net, records, store, aug, opts.batch_size, false);
  RowMatrixF feats = global.middleCols(lo, hi - lo);
  if (opts.l2_normalize) feats.rowwise().normalize();

  fs::create_directories(dir);
  cfg.write_to(dir);
  const fs::path path = dir / (a.split + "_" + a.branch + ".grfe");
  write_features(path, feats, records, kind);
  out << "features " << path.string() << ' ' << feats.rows() << 'x' << feats.cols() << '\n';
  return kExitOk;
}

// --- evaluate --------------------------------------------------------------

struct EvalArgs {
  std::string query;
  std::string gallery;
  bool ablation = false;
  std::vector<int> dims{256, 512, 512};
};

void check_dims(const FeatureFile& q, const FeatureFile& g) {
  if (q.features.cols() != g.features.cols()) {
    throw ShapeError("query features have dim " + std::to_string(q.features.cols()) + " but gallery features have " +
                     std::to_string(g.features.cols()));
  }
}

int cmd_evaluate(const Common& c, const std::vector<std::string>& extras, const EvalArgs& a, std::ostream& out) {
  const RunConfig cfg = resolve(c, extras);
  const EvalProtocol protocol = cfg.eval();
  const FeatureFile q = read_features(a.query);
  const FeatureFile g = read_features(a.gallery);
  check_dims(q, g);
  const auto qm = meta_of(q.records), gm = meta_of(g.records);
  const EvalResult r = cmc_map(distance_matrix(q.features, g.features), qm, gm, protocol);
  const std::string report = format_report(r);
  out << report;
  std::string table;
  if (a.ablation) {
    if (a.dims.size() != 3) throw ConfigError("--dims takes three values: grey rgb joint");
    if (a.dims[0] + a.dims[1] + a.dims[2] != q.features.cols()) {
      throw ShapeError("--dims sum to " + std::to_string(a.dims[0] + a.dims[1] + a.dims[2]) +
                       " but the features have dim " + std::to_string(q.features.cols()));
    }
    table = format_ablation(branch_ablation(q.features, g.features, qm, gm, a.dims[0], a.dims[1], a.dims[2], protocol));
    out << table;
  }
  if (!c.out.empty()) {
    fs::create_directories(c.out);
    cfg.write_to(c.out);
    std::ofstream(fs::path(c.out) / "report.txt") << report;
    if (a.ablation) std::ofstream(fs::path(c.out) / "ablation.csv") << table;
  }
  return kExitOk;
}

// --- rank ------------------------------------------------------------------

struct RankArgs {
  std::string query;
  std::string gallery;
  std::optional<int> index;
  std::optional<int> id;
  int k = 10;
};

int cmd_rank(const Common& c, const RankArgs& a, std::ostream& out, std::ostream& err) {
  const fs::path dir = require_out(c, "rank");
  const FeatureFile q = read_features(a.query);
  const FeatureFile g = read_features(a.gallery);
  check_dims(q, g);
  if (a.k < 1) throw ConfigError("--k must be positive");
  int qi = -1;
  if (a.index) {
    qi = *a.index;
    if (qi < 0 || qi >= static_cast<int>(q.records.size())) {
      throw ConfigError("query index " + std::to_string(qi) + " out of range");
    }
  } else if (a.id) {
    for (std::size_t i = 0; i < q.records.size(); ++i) {
      if (q.records[i].person_id() == *a.id) {
        qi = static_cast<int>(i);
        break;
      }
    }
    if (qi < 0) throw DataError("no query with person id " + std::to_string(*a.id));
  } else {
    throw ConfigError("rank needs --index or --id");
  }
  const auto qm = meta_of(q.records), gm = meta_of(g.records);
  const auto entries = rank_list(0, distance_matrix(q.features.row(qi), g.features), std::span<const RecordMeta>(qm).subspan(qi, 1), gm, a.k);

  fs::create_directories(dir);
  std::ostringstream text;
  const auto& qr = q.records[static_cast<std::size_t>(qi)];
  text << "query " << qi << ' ' << qr.person_id() << ' ' << qr.camera_id() << ' ' << qr.image_path().string() << '\n';
  text << "rank,gallery_index,person_id,camera_id,distance,match,image_path\n";
  for (std::size_t r = 0; r < entries.size(); ++r) {
    const auto& e = entries[r];
    const auto& gr = g.records[static_cast<std::size_t>(e.gallery_index)];
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", e.distance);
    text << r + 1 << ',' << e.gallery_index << ',' << gr.person_id() << ',' << gr.camera_id() << ',' << buf << ','
         << (e.match ? 1 : 0) << ',' << gr.image_path().string() << '\n';
  }
  out << text.str();
  std::ofstream(dir / "ranking.txt") << text.str();

  try {
    std::vector<MontageTile> tiles{{load_rgb(qr.image_path()), TileMark::kQuery}};
    for (const auto& e : entries) {
      tiles.push_back({load_rgb(g.records[static_cast<std::size_t>(e.gallery_index)].image_path()),
                       e.match ? TileMark::kMatch : TileMark::kMismatch});
    }
    save_rgb(dir / "montage.png", render_montage(tiles));
    out << "montage " << (dir / "montage.png").string() << " (" << tiles.size() << " tiles)\n";
  } catch (const DataError& e) {
    err << "warning: " << e.what() << "; wrote the text listing only\n";
  }
  return kExitOk;
}

// --- convert-grey ----------------------------------------------------------

int cmd_convert_grey(const Common& c, const std::string& input, const std::string& weights, std::ostream& out) {
  if (c.out.empty()) throw ConfigError("--out is required for convert-grey (output image path)");
  GreyWeights w;
  if (weights == "luma") {
    w = GreyWeights::luma();
  } else if (weights == "average") {
    w = GreyWeights::average();
  } else {
    throw ConfigError("--weights must be luma or average");
  }
  save_rgb(c.out, to_greyscale(load_rgb(input), w));
  out << "grey " << c.out << '\n';
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Two-stream RGB and greyscale person re-identification"};
  app.require_subcommand(1);

  Common common;
  ToyArgs toy;
  auto* prep = app.add_subcommand("prepare-toy", "Render a synthetic dataset with a manifest");
  add_common(prep, common);
  prep->add_option("--ids", toy.toy.identities, "Identities");
  prep->add_option("--per-id", toy.toy.images_per_identity, "Images per identity");
  prep->add_option("--cams", toy.toy.cameras, "Cameras");
  prep->add_option("--noise", toy.toy.noise_sigma, "Pixel noise sigma");
  prep->add_flag("--no-confound", toy.no_confound, "Give every identity its own colour");

  std::string resume;
  auto* train = app.add_subcommand("train", "Train the network");
  add_common(train, common);
  train->add_option("--resume", resume, "Checkpoint to resume from");

  ExtractArgs ex;
  auto* extract = app.add_subcommand("extract", "Write features for one split");
  add_common(extract, common);
  extract->add_option("--checkpoint", ex.checkpoint, "Checkpoint")->required();
  extract->add_option("--manifest", ex.manifest, "Manifest (else data.manifest)");
  extract->add_option("--split", ex.split, "train, query or gallery");
  extract->add_option("--branch", ex.branch, "grey, rgb, joint or global");
  extract->add_option("--expect-dim", ex.expect_dim, "Fail unless the branch has this dim");

  EvalArgs ev;
  auto* evaluate = app.add_subcommand("evaluate", "CMC and mAP for query/gallery features");
  add_common(evaluate, common);
  evaluate->add_option("--query", ev.query, "Query feature file")->required();
  evaluate->add_option("--gallery", ev.gallery, "Gallery feature file")->required();
  evaluate->add_flag("--ablation", ev.ablation, "Evaluate every branch combination");
  evaluate->add_option("--dims", ev.dims, "Grey, rgb and joint dims of the global feature")->expected(3);

  RankArgs rk;
  auto* rank = app.add_subcommand("rank", "Ranking list and montage for one query");
  add_common(rank, common);
  rank->add_option("--query", rk.query, "Query feature file")->required();
  rank->add_option("--gallery", rk.gallery, "Gallery feature file")->required();
  rank->add_option("--index", rk.index, "Query row");
  rank->add_option("--id", rk.id, "First query with this person id");
  rank->add_option("--k", rk.k, "List length");

  std::string grey_in, grey_weights = "luma";
  auto* grey = app.add_subcommand("convert-grey", "Convert one image to three-channel greyscale");
  add_common(grey, common);
  grey->add_option("--input", grey_in, "Input image")->required();
  grey->add_option("--weights", grey_weights, "luma or average");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    if (prep->parsed()) {
      if (!prep->remaining().empty()) throw ConfigError("unexpected argument '" + prep->remaining().front() + "'");
      return cmd_prepare_toy(common, toy, out);
    }
    if (train->parsed()) return cmd_train(common, train->remaining(), resume, out, err);
    if (extract->parsed()) return cmd_extract(common, extract->remaining(), ex, out);
    if (evaluate->parsed()) return cmd_evaluate(common, evaluate->remaining(), ev, out);
    if (rank->parsed()) {
      if (!rank->remaining().empty()) throw ConfigError("unexpected argument '" + rank->remaining().front() + "'");
      return cmd_rank(common, rk, out, err);
    }
    if (grey->parsed()) return cmd_convert_grey(common, grey_in, grey_weights, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const IntegrityError& e) {
    err << "integrity error: " << e.what() << '\n';
    return kExitIntegrity;
  } catch (const ShapeError& e) {
    err << "shape error: " << e.what() << '\n';
    return kExitShape;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitInternal;
}

}  // namespace greyreid::cli
