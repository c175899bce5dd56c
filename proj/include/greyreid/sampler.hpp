#ifndef GREYREID_SAMPLER_HPP_
#define GREYREID_SAMPLER_HPP_

#include <cstddef>
#include <cstdint>
#include <vector>

#include "greyreid/augment.hpp"
#include "greyreid/dataset.hpp"
#include "greyreid/image_store.hpp"
#include "greyreid/tensor.hpp"

namespace greyreid {

/// Indices (into the train list) and dense labels of one P x K batch,
/// grouped identity by identity.
struct PKIndexBatch {
  std::vector<std::size_t> records;
  std::vector<int> labels;
};

/// Materialized batch: rgb[i] and grey[i] come from the same augmented image.
struct PKBatch {
  Tensor rgb;   // N x 3 x H x W
  Tensor grey;  // N x 3 x H x W
  std::vector<int> labels;
  std::vector<std::size_t> records;
  int P = 0;
  int K = 0;
  int size() const { return static_cast<int>(labels.size()); }
};

// Batch plan for one epoch, a pure function of (seed, epoch). Each
// identity's images are shuffled and cut into K-sized chunks (short chunks
// are topped up by sampling with replacement); batches draw P distinct
// identities at a time. Every identity appears in at least one batch.
// Throws ConfigError when the train split has fewer than P identities.
std::vector<PKIndexBatch> sample_pk_batches(const std::vector<ImageRecord>& train, const ClassIndex& classes, int P,
                                            int K, std::uint64_t seed, int epoch);

// Loads and augments every image of a batch plan. Sample i draws from the
// stream (seed, epoch, step, i), so `workers` does not affect the result.
PKBatch materialize_batch(const PKIndexBatch& plan, const std::vector<ImageRecord>& train, ImageStore& store,
                          const AugmentConfig& cfg, std::uint64_t seed, int epoch, int step, int P, int K,
                          int workers = 1);

}  // namespace greyreid

#endif  // GREYREID_SAMPLER_HPP_
