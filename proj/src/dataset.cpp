#include "greyreid/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iostream>
#include <regex>
#include <set>
#include <sstream>

#include "greyreid/errors.hpp"

namespace greyreid {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

bool parse_int(const std::string& s, int& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".jpg" || ext == ".jpeg" || ext == ".png" || ext == ".bmp";
}

std::vector<ImageRecord>& records_mut(DatasetSplit& split, SplitKind kind) {
  switch (kind) {
    case SplitKind::kTrain: return split.train;
    case SplitKind::kQuery: return split.query;
    case SplitKind::kGallery: return split.gallery;
  }
  return split.train;
}

// Junk ids are only meaningful as gallery distractors.
bool admit(DatasetSplit& split, SplitKind kind, ImageRecord rec) {
  if (rec.is_junk() && kind != SplitKind::kGallery) {
    split.warnings.push_back("junk id dropped from " + std::string(split_name(kind)) + ": " +
                             rec.image_path().string());
    return false;
  }
  records_mut(split, kind).push_back(std::move(rec));
  return true;
}

}  // namespace

std::string_view split_name(SplitKind kind) {
  switch (kind) {
    case SplitKind::kTrain: return "train";
    case SplitKind::kQuery: return "query";
    case SplitKind::kGallery: return "gallery";
  }
  return "?";
}

SplitKind parse_split_name(std::string_view name) {
  if (name == "train") return SplitKind::kTrain;
  if (name == "query") return SplitKind::kQuery;
  if (name == "gallery") return SplitKind::kGallery;
  throw DataError("unknown split '" + std::string(name) + "'");
}

ImageRecord::ImageRecord(fs::path image_path, int person_id, int camera_id)
    : image_path_(std::move(image_path)), person_id_(person_id), camera_id_(camera_id) {
  if (person_id < kJunkPersonId) throw DataError("invalid person id " + std::to_string(person_id));
  if (camera_id < 0) throw DataError("invalid camera id " + std::to_string(camera_id));
}

ClassIndex::ClassIndex(const std::vector<ImageRecord>& train) {
  for (const auto& rec : train) {
    if (rec.is_junk()) continue;
    if (dense_.emplace(rec.person_id(), static_cast<int>(person_ids_.size())).second) {
      person_ids_.push_back(rec.person_id());
    }
  }
}

int ClassIndex::dense(int person_id) const {
  auto it = dense_.find(person_id);
  if (it == dense_.end()) throw DataError("person id " + std::to_string(person_id) + " not in train classes");
  return it->second;
}

const std::vector<ImageRecord>& DatasetSplit::records(SplitKind kind) const {
  switch (kind) {
    case SplitKind::kTrain: return train;
    case SplitKind::kQuery: return query;
    case SplitKind::kGallery: return gallery;
  }
  return train;
}

MarketName parse_market_filename(std::string_view name) {
  static const std::regex pattern(R"(^(-?\d+)_c(\d+).*$)");
  const std::string s(name);
  std::smatch m;
  if (!std::regex_match(s, m, pattern)) {
    throw DataError("filename does not follow <pid>_c<cam>... naming: " + s);
  }
  MarketName out{};
  if (!parse_int(m[1].str(), out.person_id) || !parse_int(m[2].str(), out.camera_id)) {
    throw DataError("filename ids out of range: " + s);
  }
  if (out.person_id < kJunkPersonId) throw DataError("invalid person id in filename: " + s);
  return out;
}

void finalize_split(DatasetSplit& split) {
  split.class_index = ClassIndex(split.train);
  std::set<std::pair<int, int>> gallery_id_cam;
  std::map<int, std::set<int>> gallery_cams;
  for (const auto& g : split.gallery) gallery_cams[g.person_id()].insert(g.camera_id());
  for (const auto& q : split.query) {
    auto it = gallery_cams.find(q.person_id());
    const bool cross_camera =
        it != gallery_cams.end() &&
        std::any_of(it->second.begin(), it->second.end(), [&](int c) { return c != q.camera_id(); });
    if (!cross_camera) {
      split.warnings.push_back("query " + q.image_path().string() + " (id " + std::to_string(q.person_id()) +
                               ") has no cross-camera gallery match");
    }
  }
}

DatasetSplit parse_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest: " + path.string());
  const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");

  DatasetSplit split;
  std::set<std::pair<std::string, std::string>> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;

    std::vector<std::string> fields;
    std::stringstream ss(t);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(trim(f));
    auto bad = [&](const std::string& why) {
      return DataError(path.string() + ":" + std::to_string(lineno) + ": " + why);
    };
    if (fields.size() != 4) throw bad("expected 4 comma-separated fields, got " + std::to_string(fields.size()));

    SplitKind kind;
    try {
      kind = parse_split_name(fields[0]);
    } catch (const DataError&) {
      throw bad("unknown split '" + fields[0] + "'");
    }
    if (fields[1].empty()) throw bad("empty image path");
    int pid = 0, cam = 0;
    if (!parse_int(fields[2], pid) || pid < kJunkPersonId) throw bad("bad person_id '" + fields[2] + "'");
    if (!parse_int(fields[3], cam) || cam < 0) throw bad("bad camera_id '" + fields[3] + "'");
    if (!seen.emplace(fields[0], fields[1]).second) {
      throw bad("duplicate " + fields[0] + " entry for " + fields[1]);
    }
    fs::path img(fields[1]);
    if (img.is_relative()) img = base / img;
    admit(split, kind, ImageRecord(img.lexically_normal(), pid, cam));
  }
  finalize_split(split);
  return split;
}

DatasetSplit ingest_market_directory(const fs::path& root) {
  const std::pair<const char*, SplitKind> dirs[] = {
      {"bounding_box_train", SplitKind::kTrain},
      {"query", SplitKind::kQuery},
      {"bounding_box_test", SplitKind::kGallery},
  };
  DatasetSplit split;
  for (const auto& [dir, kind] : dirs) {
    const fs::path d = root / dir;
    if (!fs::is_directory(d)) throw DataError("missing directory " + d.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(d)) {
      if (e.is_regular_file() && is_image_file(e.path())) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& p : files) {
      const MarketName n = parse_market_filename(p.filename().string());
      admit(split, kind, ImageRecord(p, n.person_id, n.camera_id));
    }
  }
  finalize_split(split);
  return split;
}

namespace {

void write_rows(std::ostream& out, const fs::path& base, SplitKind kind, const std::vector<ImageRecord>& records) {
  for (const auto& r : records) {
    fs::path p = r.image_path();
    if (!base.empty()) {
      const fs::path rel = p.lexically_relative(base);
      if (!rel.empty() && rel.native().find("..") != 0) p = rel;
    }
    out << split_name(kind) << ',' << p.generic_string() << ',' << r.person_id() << ',' << r.camera_id() << '\n';
  }
}

fs::path manifest_base(const fs::path& path) {
  return path.has_parent_path() ? fs::absolute(path.parent_path()).lexically_normal() : fs::current_path();
}

}  // namespace

void write_manifest(const fs::path& path, const DatasetSplit& split) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write manifest: " + path.string());
  out << "# split,image_path,person_id,camera_id\n";
  const fs::path base = manifest_base(path);
  for (SplitKind k : {SplitKind::kTrain, SplitKind::kQuery, SplitKind::kGallery}) {
    std::vector<ImageRecord> abs;
    for (const auto& r : split.records(k)) {
      abs.emplace_back(fs::absolute(r.image_path()).lexically_normal(), r.person_id(), r.camera_id());
    }
    write_rows(out, base, k, abs);
  }
  if (!out) throw DataError("write failed: " + path.string());
}

void write_records(const fs::path& path, SplitKind kind, const std::vector<ImageRecord>& records) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "# split,image_path,person_id,camera_id\n";
  std::vector<ImageRecord> abs;
  for (const auto& r : records) {
    abs.emplace_back(fs::absolute(r.image_path()).lexically_normal(), r.person_id(), r.camera_id());
  }
  write_rows(out, manifest_base(path), kind, abs);
  if (!out) throw DataError("write failed: " + path.string());
}

std::vector<ImageRecord> read_records(const fs::path& path) {
  // Sidecars can mix splits; keep file order regardless of split column.
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");
  std::vector<ImageRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(t);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(trim(f));
    int pid = 0, cam = 0;
    if (fields.size() != 4 || !parse_int(fields[2], pid) || !parse_int(fields[3], cam)) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": malformed row");
    }
    fs::path img(fields[1]);
    if (img.is_relative()) img = base / img;
    out.emplace_back(img.lexically_normal(), pid, cam);
  }
  return out;
}

}  // namespace greyreid
