#ifndef GREYREID_LOSSES_HPP_
#define GREYREID_LOSSES_HPP_

#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "greyreid/model.hpp"
#include "greyreid/tensor.hpp"

namespace greyreid {

enum class Reduction { kMean, kSum };

std::string reduction_name(Reduction r);
Reduction parse_reduction(const std::string& name);

/// Per-branch multipliers. `joint` scales the part classifiers and the
/// joint-embedding triplet term together.
struct BranchWeights {
  double grey = 1.0;
  double rgb = 1.0;
  double joint = 1.0;
  double global = 1.0;
  bool operator==(const BranchWeights&) const = default;
};

struct LossConfig {
  double lambda = 1.0;
  double margin = 0.3;
  Reduction reduction = Reduction::kMean;
  BranchWeights weights;

  void validate() const;
  bool operator==(const LossConfig&) const = default;
};

void to_json(nlohmann::json& j, const LossConfig& c);
void from_json(const nlohmann::json& j, LossConfig& c);

// Softmax cross-entropy of N x C logits against dense labels. With `grad`
// set, writes dLoss/dlogits. Throws std::invalid_argument for out-of-range
// labels and NumericError for non-finite logits.
double cross_entropy(const RowMatrixD& logits, std::span<const int> labels, Reduction reduction = Reduction::kMean,
                     RowMatrixD* grad = nullptr);

// Batch-hard triplet loss on Euclidean distances: for every anchor the
// farthest same-label and the nearest other-label embedding, hinged at
// `margin`. Every label must occur at least twice and at least two labels
// must be present (std::invalid_argument otherwise).
double batch_hard_triplet(const RowMatrixD& emb, std::span<const int> labels, double margin,
                          Reduction reduction = Reduction::kMean, RowMatrixD* grad = nullptr);

struct BranchLossValue {
  double ce = 0.0;
  double triplet = 0.0;
  double total = 0.0;
};

// cross_entropy + lambda * batch_hard_triplet. The triplet term is skipped
// (reported as 0) when lambda is 0.
BranchLossValue branch_loss(const RowMatrixD& logits, const RowMatrixD& emb, std::span<const int> labels,
                            const LossConfig& cfg, RowMatrixD* grad_logits = nullptr, RowMatrixD* grad_emb = nullptr);

struct HeadLoss {
  std::string name;
  double weight = 1.0;
  double ce = 0.0;
  double triplet = 0.0;
  double total = 0.0;  // ce + lambda * triplet, before `weight`
};

struct LossReport {
  double total = 0.0;  // sum of weight * head.total
  std::vector<HeadLoss> heads;

  const HeadLoss& head(const std::string& name) const;
};

// Objective over every head: grey, rgb, part<i> (classification only),
// joint (triplet on the concatenated part embeddings), global. With
// `grads` set, fills the gradients of the weighted total.
LossReport total_loss(const NetworkOutput& out, std::span<const int> labels, const LossConfig& cfg,
                      OutputGrads* grads = nullptr);

}  // namespace greyreid

#endif  // GREYREID_LOSSES_HPP_
