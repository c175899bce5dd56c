#ifndef GREYREID_TRAINER_HPP_
#define GREYREID_TRAINER_HPP_

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "greyreid/augment.hpp"
#include "greyreid/checkpoint.hpp"
#include "greyreid/dataset.hpp"
#include "greyreid/image_store.hpp"
#include "greyreid/losses.hpp"
#include "greyreid/model.hpp"

namespace greyreid {

using LrSchedule = std::vector<std::pair<int, double>>;  // (first epoch, lr)

struct TrainConfig {
  int epochs = 300;
  LrSchedule lr_schedule{{0, 0.01}, {100, 0.001}, {200, 0.0001}};
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::uint64_t seed = 0;
  LossConfig loss;
  int P = 32;
  int K = 4;
  int checkpoint_every = 0;  // epochs; 0 keeps only the final checkpoint
  int workers = 1;
  // Backbone weight file applied to both streams after initialization.
  std::string pretrained;
  AugmentConfig augment;

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);

// Piecewise-constant learning rate. Throws std::out_of_range outside [0, epochs).
double lr_at(int epoch, const LrSchedule& schedule, int epochs);

/// SGD with momentum and L2 weight decay:
///   v <- momentum * v + (g + wd * w);  w <- w - lr * v
class Sgd {
 public:
  Sgd(double momentum, double weight_decay) : momentum_(momentum), weight_decay_(weight_decay) {}
  void step(const nn::StateRefs& refs, double lr);
  std::map<std::string, Tensor>& buffers() { return velocity_; }

 private:
  double momentum_, weight_decay_;
  std::map<std::string, Tensor> velocity_;
};

/// One row of the training log: `epoch,step,head,ce,triplet,total`.
struct LogRecord {
  int epoch = 0;
  long step = 0;
  std::string head;
  double ce = 0.0;
  double triplet = 0.0;
  double total = 0.0;
};

std::string format_log_record(const LogRecord& r);

struct TrainState {
  int epoch = 0;  // next epoch to run
  long global_step = 0;
  std::vector<double> epoch_loss;  // mean total loss per finished epoch
  std::vector<double> step_lr;     // learning rate applied at every step
  std::vector<LogRecord> log;
};

/// Joint end-to-end training of every branch. Batches and augmentation are
/// drawn from streams keyed by (seed, epoch, step), so a resumed run
/// replays exactly the batches an uninterrupted run would have seen.
class Trainer {
 public:
  // `net_cfg.num_classes` is taken from the split's train identities
  // (ConfigError if it is set and disagrees).
  Trainer(const TrainConfig& cfg, NetworkConfig net_cfg, const DatasetSplit& split);

  // Restores weights, optimizer state and counters from a checkpoint.
  // Throws IntegrityError on corruption or incompatible network config.
  static Trainer resume(const std::filesystem::path& checkpoint, const TrainConfig& cfg, NetworkConfig net_cfg,
                        const DatasetSplit& split);

  // Trains up to (excluding) epoch `until`, default cfg.epochs.
  void run(int until = -1);
  void run_epoch();

  void set_output_dir(const std::filesystem::path& dir);
  void set_log_stream(std::ostream* out) { log_stream_ = out; }

  void save(const std::filesystem::path& path);

  TwoStreamNet& model() { return net_; }
  const TrainState& state() const { return state_; }
  const TrainConfig& config() const { return cfg_; }
  ImageStore& images() { return *store_; }

 private:
  void emit(const LogRecord& r);

  TrainConfig cfg_;
  const DatasetSplit& split_;
  TwoStreamNet net_;
  Sgd sgd_;
  TrainState state_;
  std::unique_ptr<ImageStore> store_ = std::make_unique<ImageStore>();
  std::filesystem::path out_dir_;
  std::unique_ptr<std::ofstream> log_file_;
  std::ostream* log_stream_ = nullptr;
};

}  // namespace greyreid

#endif  // GREYREID_TRAINER_HPP_
