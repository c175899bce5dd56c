#ifndef GREYREID_DATASET_HPP_
#define GREYREID_DATASET_HPP_

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace greyreid {

namespace fs = std::filesystem;

inline constexpr int kJunkPersonId = -1;

enum class SplitKind { kTrain, kQuery, kGallery };

std::string_view split_name(SplitKind kind);
SplitKind parse_split_name(std::string_view name);

/// One person image. Identity and camera labels are fixed at construction.
class ImageRecord {
 public:
  ImageRecord(fs::path image_path, int person_id, int camera_id);

  const fs::path& image_path() const { return image_path_; }
  int person_id() const { return person_id_; }
  int camera_id() const { return camera_id_; }
  bool is_junk() const { return person_id_ == kJunkPersonId; }

  bool operator==(const ImageRecord&) const = default;

 private:
  fs::path image_path_;
  int person_id_;
  int camera_id_;
};

/// Bijection between raw person ids and dense class indices 0..C-1, in
/// order of first appearance.
class ClassIndex {
 public:
  ClassIndex() = default;
  explicit ClassIndex(const std::vector<ImageRecord>& train);

  int num_classes() const { return static_cast<int>(person_ids_.size()); }
  bool contains(int person_id) const { return dense_.count(person_id) != 0; }
  int dense(int person_id) const;
  int person_id(int dense_index) const { return person_ids_.at(dense_index); }
  const std::vector<int>& person_ids() const { return person_ids_; }

 private:
  std::map<int, int> dense_;
  std::vector<int> person_ids_;
};

struct DatasetSplit {
  std::vector<ImageRecord> train;
  std::vector<ImageRecord> query;
  std::vector<ImageRecord> gallery;
  ClassIndex class_index;
  std::vector<std::string> warnings;

  const std::vector<ImageRecord>& records(SplitKind kind) const;
};

struct MarketName {
  int person_id;
  int camera_id;
  bool junk() const { return person_id == kJunkPersonId; }
};

// "<pid>_c<cam><rest>", e.g. 0001_c1s1_000151_00.jpg. Throws DataError on mismatch.
MarketName parse_market_filename(std::string_view name);

// Reads a `split,image_path,person_id,camera_id` manifest. Relative image
// paths are resolved against the manifest's directory.
DatasetSplit parse_manifest(const fs::path& path);

// Market1501-style layout: bounding_box_train/, query/, bounding_box_test/.
DatasetSplit ingest_market_directory(const fs::path& root);

// Writes records with paths relative to the manifest directory when possible.
void write_manifest(const fs::path& path, const DatasetSplit& split);
void write_records(const fs::path& path, SplitKind kind, const std::vector<ImageRecord>& records);
std::vector<ImageRecord> read_records(const fs::path& path);

// Builds the class index and cross-camera warnings after the lists are filled.
void finalize_split(DatasetSplit& split);

}  // namespace greyreid

#endif  // GREYREID_DATASET_HPP_
