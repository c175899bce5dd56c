#include "greyreid/feature_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "greyreid/errors.hpp"

namespace greyreid {

namespace {

static_assert(std::endian::native == std::endian::little, "feature files assume a little-endian host");

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::filesystem::path& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw IntegrityError("truncated feature file " + path.string());
  return v;
}

}  // namespace

std::filesystem::path sidecar_path(const std::filesystem::path& features) {
  std::filesystem::path p = features;
  p += ".csv";
  return p;
}

void write_feature_matrix(const std::filesystem::path& path, const RowMatrixF& features) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(kFeatureMagic, 4);
  put<std::uint32_t>(out, kFeatureVersion);
  put<std::uint64_t>(out, static_cast<std::uint64_t>(features.rows()));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(features.cols()));
  out.write(reinterpret_cast<const char*>(features.data()),
            static_cast<std::streamsize>(features.size() * sizeof(float)));
  if (!out) throw DataError("write failed: " + path.string());
}

RowMatrixF read_feature_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open feature file " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kFeatureMagic, 4) != 0) {
    throw IntegrityError("not a feature file (bad magic): " + path.string());
  }
  const auto version = get<std::uint32_t>(in, path);
  if (version != kFeatureVersion) {
    throw IntegrityError("unsupported feature file version " + std::to_string(version) + ": " + path.string());
  }
  const auto rows = get<std::uint64_t>(in, path);
  const auto dim = get<std::uint64_t>(in, path);
  if (rows > (1ull << 31) || dim > (1ull << 24)) throw IntegrityError("implausible feature file header: " + path.string());
  RowMatrixF m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(dim));
  if (!in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(float)))) {
    throw IntegrityError("truncated feature file " + path.string());
  }
  if (in.peek() != std::char_traits<char>::eof()) throw IntegrityError("trailing bytes in feature file " + path.string());
  return m;
}

void write_features(const std::filesystem::path& path, const RowMatrixF& features,
                    const std::vector<ImageRecord>& records, SplitKind kind) {
  if (static_cast<std::size_t>(features.rows()) != records.size()) {
    throw ShapeError("feature rows and records differ in count");
  }
  write_feature_matrix(path, features);
  write_records(sidecar_path(path), kind, records);
}

FeatureFile read_features(const std::filesystem::path& path) {
  FeatureFile f;
  f.features = read_feature_matrix(path);
  const auto side = sidecar_path(path);
  if (!std::filesystem::exists(side)) throw DataError("missing sidecar metadata " + side.string());
  f.records = read_records(side);
  if (static_cast<Eigen::Index>(f.records.size()) != f.features.rows()) {
    throw DataError("sidecar " + side.string() + " lists " + std::to_string(f.records.size()) + " records for " +
                    std::to_string(f.features.rows()) + " feature rows");
  }
  return f;
}

}  // namespace greyreid
