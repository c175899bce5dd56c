#ifndef GREYREID_TOY_DATASET_HPP_
#define GREYREID_TOY_DATASET_HPP_

#include <cstdint>
#include <filesystem>
#include <random>

#include <opencv2/core.hpp>

#include "greyreid/dataset.hpp"

namespace greyreid {

/// Synthetic person-like figures for desk-scale runs. An identity is a
/// (shirt colour, shirt pattern) pair laid out on a colour x pattern grid;
/// with colour_confound on, several identities share a colour and differ
/// only in pattern, so colour alone cannot separate them.
struct ToyConfig {
  int identities = 16;
  int images_per_identity = 8;
  int cameras = 2;
  bool color_confound = true;
  int height = 128;
  int width = 64;
  double noise_sigma = 5.0;

  void validate() const;
};

struct ToyIdentity {
  int color = 0;
  int pattern = 0;
  bool train = false;
  cv::Vec3b shirt;
  cv::Vec3b stripe;
};

ToyIdentity toy_identity(const ToyConfig& cfg, int identity);

// Renders one RGB image. `camera` is 0-based.
cv::Mat render_toy_image(const ToyConfig& cfg, const ToyIdentity& id, int camera, std::mt19937_64& rng);

// Renders the whole set under `out_dir` in the Market1501 directory layout
// plus `manifest.csv`, and returns the split. Train identities are disjoint
// from query/gallery identities; each test identity contributes one query
// per camera and the rest of its images to the gallery.
DatasetSplit generate_toy_dataset(const ToyConfig& cfg, std::uint64_t seed, const std::filesystem::path& out_dir);

}  // namespace greyreid

#endif  // GREYREID_TOY_DATASET_HPP_
