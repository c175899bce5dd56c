#ifndef GREYREID_FEATURE_IO_HPP_
#define GREYREID_FEATURE_IO_HPP_

#include <cstdint>
#include <filesystem>
#include <vector>

#include "greyreid/dataset.hpp"
#include "greyreid/tensor.hpp"

namespace greyreid {

// Binary layout, little endian:
//   "GRFE" | version u32 | rows u64 | dim u64 | rows*dim f32 (row-major)
inline constexpr char kFeatureMagic[4] = {'G', 'R', 'F', 'E'};
inline constexpr std::uint32_t kFeatureVersion = 1;

struct FeatureFile {
  RowMatrixF features;
  std::vector<ImageRecord> records;  // row i <-> records[i]
};

// Sidecar manifest binding rows to records: "<path>.csv".
std::filesystem::path sidecar_path(const std::filesystem::path& features);

void write_feature_matrix(const std::filesystem::path& path, const RowMatrixF& features);
RowMatrixF read_feature_matrix(const std::filesystem::path& path);

void write_features(const std::filesystem::path& path, const RowMatrixF& features,
                    const std::vector<ImageRecord>& records, SplitKind kind);
// Throws DataError when the sidecar is missing or disagrees with the row count.
FeatureFile read_features(const std::filesystem::path& path);

}  // namespace greyreid

#endif  // GREYREID_FEATURE_IO_HPP_
