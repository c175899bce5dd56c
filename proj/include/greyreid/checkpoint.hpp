#ifndef GREYREID_CHECKPOINT_HPP_
#define GREYREID_CHECKPOINT_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "json.hpp"

#include "greyreid/model.hpp"

namespace greyreid {

// Container layout:
//   "GRCK" | version u32 | header length u64 | header JSON |
//   tensor count u64 | tensors | crc32 of everything before it (u32)
// Each tensor: kind u8 (0 param, 1 buffer, 2 momentum) | name length u32 |
//   name | ndim u32 | dims u32... | f32 data.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  NetworkConfig network;
  // Free-form training state: epoch, global_step, seed, loss history, ...
  nlohmann::json header = nlohmann::json::object();
  std::map<std::string, Tensor> params;
  std::map<std::string, Tensor> buffers;
  std::map<std::string, Tensor> momentum;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
// Throws IntegrityError on bad magic, version, checksum or truncation.
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Throws IntegrityError naming the first mismatching field.
void check_compatible(const NetworkConfig& expected, const NetworkConfig& found);

void capture_model(TwoStreamNet& net, Checkpoint& ckpt);
// Copies parameters and buffers into `net`; names and shapes must match.
void restore_model(TwoStreamNet& net, const Checkpoint& ckpt);

// Builds a network from a checkpoint's config echo and restores its weights.
TwoStreamNet load_model(const std::filesystem::path& path);

// Backbone weight file, used to start both streams from pretrained weights:
//   "GRBW" | version u32 | tensor count u64 | tensors
// Each tensor: name length u32 | name | ndim u32 | dims u32... | f32 data.
// Names are relative to the backbone (torchvision layout for standard-50).
inline constexpr std::uint32_t kBackboneWeightsVersion = 1;

void save_backbone_weights(const std::filesystem::path& path, const std::map<std::string, Tensor>& tensors);
// Throws IntegrityError on bad magic, version or truncation.
std::map<std::string, Tensor> load_backbone_weights(const std::filesystem::path& path);
// Copies into both backbones. Every backbone parameter and buffer must be
// present with a matching shape; extra tensors (e.g. a classifier) are ignored.
void apply_backbone_weights(TwoStreamNet& net, const std::map<std::string, Tensor>& tensors);

// CRC-32 over every parameter and buffer in canonical order.
std::uint32_t parameter_checksum(TwoStreamNet& net);

}  // namespace greyreid

#endif  // GREYREID_CHECKPOINT_HPP_
