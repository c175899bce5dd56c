#ifndef GREYREID_CONFIG_HPP_
#define GREYREID_CONFIG_HPP_

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "greyreid/augment.hpp"
#include "greyreid/eval.hpp"
#include "greyreid/losses.hpp"
#include "greyreid/model.hpp"
#include "greyreid/trainer.hpp"

namespace greyreid {

struct ExtractOptions {
  int batch_size = 16;
  bool l2_normalize = false;
};

/// Resolved run configuration: defaults, then a JSON config file, then
/// dotted-key overrides (`loss.lambda=0.5`). Only keys present in the
/// defaults are accepted.
class RunConfig {
 public:
  RunConfig();

  static nlohmann::json defaults();

  // Deep-merges a JSON file. Throws ConfigError on unknown keys or bad JSON.
  void merge_file(const std::filesystem::path& path);
  void merge(const nlohmann::json& patch);
  // `key` is dotted; `value` is parsed as JSON when possible, else taken as a string.
  void set(const std::string& key, const std::string& value);
  // "key=value".
  void set_assignment(const std::string& assignment);

  const nlohmann::json& json() const { return root_; }
  std::string dump() const { return root_.dump(2); }

  std::uint64_t seed() const;
  NetworkConfig network() const;  // num_classes left 0, filled from data
  LossConfig loss() const;
  AugmentConfig augment() const;
  TrainConfig train() const;
  EvalProtocol eval() const;
  ExtractOptions extract() const;

  // Writes the resolved config to `dir/resolved_config.json`.
  void write_to(const std::filesystem::path& dir) const;

 private:
  nlohmann::json root_;
};

}  // namespace greyreid

#endif  // GREYREID_CONFIG_HPP_
