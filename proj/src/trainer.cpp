#include "greyreid/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "greyreid/errors.hpp"
#include "greyreid/sampler.hpp"

namespace greyreid {

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train.epochs must be positive");
  if (lr_schedule.empty() || lr_schedule.front().first != 0) {
    throw ConfigError("train.lr_schedule must start at epoch 0");
  }
  for (std::size_t i = 0; i < lr_schedule.size(); ++i) {
    if (i > 0 && lr_schedule[i].first <= lr_schedule[i - 1].first) {
      throw ConfigError("train.lr_schedule breakpoints must be strictly increasing");
    }
    if (lr_schedule[i].first >= epochs) throw ConfigError("train.lr_schedule breakpoint beyond the last epoch");
    if (!(lr_schedule[i].second > 0.0) || !std::isfinite(lr_schedule[i].second)) {
      throw ConfigError("train.lr_schedule rates must be positive");
    }
  }
  if (P < 2) throw ConfigError("train.P must be at least 2");
  if (K < 2 && loss.lambda > 0.0) throw ConfigError("train.K must be at least 2 for the triplet loss");
  if (K < 1) throw ConfigError("train.K must be positive");
  if (momentum < 0.0 || weight_decay < 0.0) throw ConfigError("momentum and weight decay must be non-negative");
  if (workers < 1) throw ConfigError("train.workers must be positive");
  loss.validate();
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  nlohmann::json sched = nlohmann::json::array();
  for (const auto& [e, lr] : c.lr_schedule) sched.push_back({e, lr});
  j = nlohmann::json{{"epochs", c.epochs}, {"lr_schedule", sched}, {"momentum", c.momentum},
                     {"weight_decay", c.weight_decay}, {"seed", c.seed}, {"loss", c.loss},
                     {"P", c.P}, {"K", c.K}, {"checkpoint_every", c.checkpoint_every},
                     {"pretrained", c.pretrained}};
}

double lr_at(int epoch, const LrSchedule& schedule, int epochs) {
  if (epoch < 0 || epoch >= epochs) {
    throw std::out_of_range("epoch " + std::to_string(epoch) + " outside [0, " + std::to_string(epochs) + ")");
  }
  double lr = schedule.at(0).second;
  for (const auto& [start, rate] : schedule) {
    if (epoch >= start) lr = rate;
  }
  return lr;
}

void Sgd::step(const nn::StateRefs& refs, double lr) {
  const float mu = static_cast<float>(momentum_), wd = static_cast<float>(weight_decay_);
  const float rate = static_cast<float>(lr);
  for (const auto& p : refs.params) {
    auto it = velocity_.find(p.name);
    const bool fresh = it == velocity_.end();
    if (fresh) it = velocity_.emplace(p.name, Tensor(p.value->shape())).first;
    Tensor& v = it->second;
    Tensor& w = *p.value;
    const Tensor& g = *p.grad;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const float d = g[i] + wd * w[i];
      v[i] = fresh ? d : mu * v[i] + d;
      w[i] -= rate * v[i];
    }
  }
}

std::string format_log_record(const LogRecord& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%d,%ld,%s,%.9g,%.9g,%.9g", r.epoch, r.step, r.head.c_str(), r.ce, r.triplet,
                r.total);
  return buf;
}

namespace {

NetworkConfig with_classes(NetworkConfig c, const DatasetSplit& split) {
  const int classes = split.class_index.num_classes();
  if (classes == 0) throw DataError("train split is empty");
  if (c.num_classes != 0 && c.num_classes != classes) {
    throw ConfigError("network.num_classes=" + std::to_string(c.num_classes) + " but the train split has " +
                      std::to_string(classes) + " identities");
  }
  c.num_classes = classes;
  return c;
}

}  // namespace

Trainer::Trainer(const TrainConfig& cfg, NetworkConfig net_cfg, const DatasetSplit& split)
    : cfg_(cfg), split_(split), net_(with_classes(net_cfg, split)), sgd_(cfg.momentum, cfg.weight_decay) {
  cfg_.validate();
  net_.init(cfg_.seed);
  if (!cfg_.pretrained.empty()) apply_backbone_weights(net_, load_backbone_weights(cfg_.pretrained));
}

Trainer Trainer::resume(const std::filesystem::path& checkpoint, const TrainConfig& cfg, NetworkConfig net_cfg,
                        const DatasetSplit& split) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  TrainConfig resumed = cfg;
  try {
    resumed.seed = ckpt.header.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(std::string("checkpoint lacks training state: ") + e.what());
  }
  Trainer t(resumed, net_cfg, split);
  restore_model(t.net_, ckpt);
  t.sgd_.buffers() = ckpt.momentum;
  try {
    t.state_.epoch = ckpt.header.at("epoch").get<int>();
    t.state_.global_step = ckpt.header.at("global_step").get<long>();
    t.state_.epoch_loss = ckpt.header.at("loss_history").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(std::string("checkpoint lacks training state: ") + e.what());
  }
  return t;
}

void Trainer::set_output_dir(const std::filesystem::path& dir) {
  out_dir_ = dir;
  std::filesystem::create_directories(dir);
  log_file_ = std::make_unique<std::ofstream>(dir / "train_log.csv", std::ios::app);
  if (!*log_file_) throw DataError("cannot write " + (dir / "train_log.csv").string());
}

void Trainer::emit(const LogRecord& r) {
  state_.log.push_back(r);
  const std::string line = format_log_record(r);
  if (log_file_) *log_file_ << line << '\n';
  if (log_stream_) *log_stream_ << line << '\n';
}

void Trainer::run(int until) {
  if (until < 0) until = cfg_.epochs;
  if (until > cfg_.epochs) throw ConfigError("cannot train past train.epochs");
  while (state_.epoch < until) run_epoch();
  if (!out_dir_.empty() && state_.epoch == cfg_.epochs) save(out_dir_ / "final.ckpt");
}

void Trainer::run_epoch() {
  const int epoch = state_.epoch;
  const double lr = lr_at(epoch, cfg_.lr_schedule, cfg_.epochs);
  const auto plan = sample_pk_batches(split_.train, split_.class_index, cfg_.P, cfg_.K, cfg_.seed, epoch);
  double loss_sum = 0.0;
  for (std::size_t step = 0; step < plan.size(); ++step) {
    const PKBatch batch = materialize_batch(plan[step], split_.train, *store_, cfg_.augment, cfg_.seed, epoch,
                                            static_cast<int>(step), cfg_.P, cfg_.K, cfg_.workers);
    for (int label : batch.labels) {
      if (label < 0 || label >= net_.config().num_classes) {
        throw ConfigError("batch label " + std::to_string(label) + " outside the network's class count");
      }
    }
    const NetworkOutput out = net_.forward(batch.rgb, batch.grey, true);
    OutputGrads grads;
    LossReport report;
    try {
      report = total_loss(out, batch.labels, cfg_.loss, &grads);
    } catch (const NumericError&) {
      report.total = std::nan("");
    }
    if (!std::isfinite(report.total)) {
      std::string ids;
      for (std::size_t idx : batch.records) ids += "\n  " + split_.train[idx].image_path().string();
      throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + " step " + std::to_string(step) +
                         "; batch images:" + ids);
    }
    net_.zero_grad();
    net_.backward(grads);
    sgd_.step(net_.state(), lr);
    state_.step_lr.push_back(lr);

    for (const auto& h : report.heads) {
      emit({epoch, state_.global_step, h.name, h.ce, h.triplet, h.weight * h.total});
    }
    emit({epoch, state_.global_step, "total", 0.0, 0.0, report.total});
    loss_sum += report.total;
    ++state_.global_step;
  }
  state_.epoch_loss.push_back(loss_sum / static_cast<double>(plan.size()));
  ++state_.epoch;
  if (!out_dir_.empty() && cfg_.checkpoint_every > 0 && state_.epoch % cfg_.checkpoint_every == 0) {
    char name[64];
    std::snprintf(name, sizeof(name), "checkpoint_epoch_%04d.ckpt", state_.epoch);
    save(out_dir_ / name);
  }
}

void Trainer::save(const std::filesystem::path& path) {
  Checkpoint ckpt;
  capture_model(net_, ckpt);
  ckpt.momentum = sgd_.buffers();
  ckpt.header = {{"epoch", state_.epoch},
                 {"global_step", state_.global_step},
                 {"seed", cfg_.seed},
                 {"loss_history", state_.epoch_loss},
                 {"class_person_ids", split_.class_index.person_ids()},
                 {"train", cfg_},
                 {"preprocessing", preprocessing_json(cfg_.augment)},
                 {"rng", {{"scheme", "derived"}, {"seed", cfg_.seed}, {"next_epoch", state_.epoch}}}};
  save_checkpoint(path, ckpt);
}

}  // namespace greyreid
