#ifndef GREYREID_MODEL_HPP_
#define GREYREID_MODEL_HPP_

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "greyreid/augment.hpp"
#include "greyreid/backbone.hpp"
#include "greyreid/dataset.hpp"
#include "greyreid/image_store.hpp"
#include "greyreid/layers.hpp"

namespace greyreid {

enum class Fusion { kPlus, kMultiply, kConcat };

std::string fusion_name(Fusion f);
Fusion parse_fusion(const std::string& name);

struct NetworkConfig {
  BackboneKind backbone = BackboneKind::kStandard50;
  int num_classes = 0;
  int dim_grey = 256;
  int dim_rgb = 512;
  int dim_joint = 512;
  int n_parts = 2;
  Fusion fusion = Fusion::kPlus;
  bool final_stride_one = true;
  // Batch norm between each embedding and its classifier.
  bool bn_neck = false;
  int toy_channels = 64;

  int global_dim() const { return dim_grey + dim_rgb + dim_joint; }
  int part_dim() const { return dim_joint / n_parts; }
  void validate() const;
  bool operator==(const NetworkConfig&) const = default;
};

void to_json(nlohmann::json& j, const NetworkConfig& c);
void from_json(const nlohmann::json& j, NetworkConfig& c);

enum class Branch { kGrey, kRgb, kJoint, kGlobal };

std::string branch_name(Branch b);
Branch parse_branch(const std::string& name);
// Column range [first, second) of a branch inside the global feature.
std::pair<int, int> branch_columns(const NetworkConfig& cfg, Branch b);

/// Per-sample embeddings and logits. Rows index the batch.
struct NetworkOutput {
  RowMatrixF emb_grey;
  RowMatrixF emb_rgb;
  std::vector<RowMatrixF> emb_parts;  // top to bottom
  RowMatrixF emb_joint;               // parts concatenated
  RowMatrixF emb_global;              // [grey | rgb | joint]
  RowMatrixF logits_grey;
  RowMatrixF logits_rgb;
  std::vector<RowMatrixF> logits_parts;
  RowMatrixF logits_global;
};

/// Loss gradients with respect to NetworkOutput fields; empty = zero.
struct OutputGrads {
  RowMatrixF emb_grey;
  RowMatrixF emb_rgb;
  std::vector<RowMatrixF> emb_parts;
  RowMatrixF emb_joint;
  RowMatrixF emb_global;
  RowMatrixF logits_grey;
  RowMatrixF logits_rgb;
  std::vector<RowMatrixF> logits_parts;
  RowMatrixF logits_global;
};

// Element-wise fusion for plus/multiply. Throws ShapeError on mismatch and
// ConfigError for concat (which needs learned weights, see FusionLayer).
Tensor fuse(const Tensor& t_rgb, const Tensor& t_grey, Fusion mode);

/// Fusion of the two stream tensors into the joint tensor. concat stacks
/// channels and maps them back to C with a learned 1x1 convolution.
class FusionLayer {
 public:
  FusionLayer(Fusion mode, int channels);
  Tensor forward(const Tensor& t_rgb, const Tensor& t_grey, bool train);
  // Returns (grad wrt t_rgb, grad wrt t_grey).
  std::pair<Tensor, Tensor> backward(const Tensor& grad_out);
  void collect(const std::string& prefix, nn::StateRefs& refs);
  void init(std::mt19937_64& rng);

 private:
  Fusion mode_;
  int channels_;
  std::unique_ptr<nn::Conv2d> reduce_;
  Tensor rgb_, grey_;
};

// Splits N x C x H x W into n contiguous horizontal bands, top first.
std::vector<Tensor> part_split(const Tensor& t, int n_parts);
// Inverse of part_split.
Tensor part_merge(const std::vector<Tensor>& parts);

/// The two-stream network: independent grey and RGB backbones, a fused
/// joint branch cut into horizontal parts, GAP and FC embedding heads on
/// every branch, a classifier per head and one on the global feature.
class TwoStreamNet {
 public:
  explicit TwoStreamNet(const NetworkConfig& cfg);

  void init(std::uint64_t seed);
  const NetworkConfig& config() const { return cfg_; }

  // rgb and grey are N x 3 x H x W, paired row for row.
  NetworkOutput forward(const Tensor& rgb, const Tensor& grey, bool train);
  void backward(const OutputGrads& grads);

  nn::StateRefs state();
  void zero_grad();

  // Stream / joint tensors of the last forward pass.
  const Tensor& rgb_tensor() const { return t_rgb_; }
  const Tensor& grey_tensor() const { return t_grey_; }
  const Tensor& joint_tensor() const { return t_joint_; }

 private:
  struct Head {
    std::unique_ptr<nn::Linear> fc;
    std::unique_ptr<nn::BatchNorm> bn;
    std::unique_ptr<nn::Linear> classifier;
  };
  Head make_head(int in, int dim) const;
  RowMatrixF classify(Head& h, const Tensor& emb, bool train);
  // Accumulates the classifier-path gradient into grad_emb.
  void classifier_backward(Head& h, const RowMatrixF& grad_logits, RowMatrixF& grad_emb);

  NetworkConfig cfg_;
  std::unique_ptr<Backbone> grey_backbone_;
  std::unique_ptr<Backbone> rgb_backbone_;
  FusionLayer fusion_;
  Head grey_head_, rgb_head_;
  std::vector<Head> part_heads_;
  std::unique_ptr<nn::Linear> global_classifier_;

  Tensor t_rgb_, t_grey_, t_joint_;
  std::vector<std::vector<int>> part_shapes_;
  int batch_ = 0;
};

/// Global features (|records| x global_dim) in evaluation mode, rows in
/// input order. Optionally L2-normalizes each row.
RowMatrixF extract_features(TwoStreamNet& net, const std::vector<ImageRecord>& records, ImageStore& store,
                            const AugmentConfig& aug, int batch_size = 16, bool l2_normalize = false);

}  // namespace greyreid

#endif  // GREYREID_MODEL_HPP_
