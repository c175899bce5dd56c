#include <fstream>

#include "doctest.h"
#include "oracles.hpp"

#include "greyreid/dataset.hpp"
#include "greyreid/errors.hpp"

using namespace greyreid;

namespace {

std::filesystem::path write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p) << text;
  return p;
}

}  // namespace

TEST_CASE("market filenames") {
  const auto a = parse_market_filename("0001_c1s1_000151_00.jpg");
  CHECK(a.person_id == 1);
  CHECK(a.camera_id == 1);
  CHECK_FALSE(a.junk());
  const auto b = parse_market_filename("-1_c3s2_000000_00.jpg");
  CHECK(b.person_id == -1);
  CHECK(b.camera_id == 3);
  CHECK(b.junk());
  CHECK_THROWS_AS(parse_market_filename("badname.jpg"), DataError);
  try {
    parse_market_filename("badname.jpg");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("badname.jpg") != std::string::npos);
  }
}

TEST_CASE("class index follows first appearance") {
  const auto dir = oracle::temp_dir("ds_order");
  const auto m = write_file(dir / "m.csv",
                            "train,a.png,42,1\ntrain,b.png,7,2\ntrain,c.png,42,2\ntrain,d.png,7,1\n"
                            "query,q.png,3,1\ngallery,g.png,3,2\n");
  const auto split = parse_manifest(m);
  CHECK(split.class_index.num_classes() == 2);
  CHECK(split.class_index.dense(42) == 0);
  CHECK(split.class_index.dense(7) == 1);
  CHECK(split.class_index.person_id(1) == 7);
  CHECK(split.train.size() == 4);
  CHECK(split.train[0].image_path() == (dir / "a.png").lexically_normal());
  CHECK(split.warnings.empty());
}

TEST_CASE("query without cross-camera gallery match warns") {
  const auto dir = oracle::temp_dir("ds_warn");
  const auto m = write_file(dir / "m.csv", "train,a.png,1,1\ntrain,b.png,1,2\nquery,q.png,5,1\ngallery,g.png,5,1\n");
  const auto split = parse_manifest(m);
  CHECK(split.query.size() == 1);
  REQUIRE(split.warnings.size() == 1);
  CHECK(split.warnings[0].find("no cross-camera") != std::string::npos);
}

TEST_CASE("junk ids are dropped from train and query, kept in gallery") {
  const auto dir = oracle::temp_dir("ds_junk");
  const auto m = write_file(dir / "m.csv",
                            "train,a.png,1,1\ntrain,j.png,-1,1\nquery,q.png,1,1\nquery,jq.png,-1,2\n"
                            "gallery,g.png,1,2\ngallery,jg.png,-1,1\n");
  const auto split = parse_manifest(m);
  CHECK(split.train.size() == 1);
  CHECK(split.query.size() == 1);
  CHECK(split.gallery.size() == 2);
  CHECK(split.gallery[1].is_junk());
  CHECK(split.warnings.size() == 2);
}

TEST_CASE("manifest errors name the line") {
  const auto dir = oracle::temp_dir("ds_err");
  auto expect = [&](const std::string& text, const std::string& needle) {
    const auto m = write_file(dir / "m.csv", text);
    try {
      parse_manifest(m);
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
  };
  expect("train,a.png,1,1\ntrain,b.png,1\n", ":2:");
  expect("# header\nbogus,a.png,1,1\n", ":2:");
  expect("train,a.png,x,1\n", "person_id");
  expect("train,a.png,1,1\ntrain,a.png,1,2\n", "duplicate");
  CHECK_THROWS_AS(parse_manifest(dir / "missing.csv"), DataError);
}

TEST_CASE("manifest round trip keeps records") {
  const auto dir = oracle::temp_dir("ds_rt");
  DatasetSplit s;
  s.train = {ImageRecord(dir / "t/a.png", 3, 1), ImageRecord(dir / "t/b.png", 3, 2)};
  s.query = {ImageRecord(dir / "q/a.png", 9, 1)};
  s.gallery = {ImageRecord(dir / "g/a.png", 9, 2), ImageRecord(dir / "g/b.png", -1, 1)};
  finalize_split(s);
  write_manifest(dir / "m.csv", s);
  const auto back = parse_manifest(dir / "m.csv");
  CHECK(back.train == s.train);
  CHECK(back.query == s.query);
  CHECK(back.gallery == s.gallery);
  std::ifstream in(dir / "m.csv");
  std::string header, first;
  std::getline(in, header);
  std::getline(in, first);
  CHECK(first == "train,t/a.png,3,1");
}

TEST_CASE("market directory ingestion") {
  const auto dir = oracle::temp_dir("ds_market");
  for (const char* d : {"bounding_box_train", "query", "bounding_box_test"}) std::filesystem::create_directories(dir / d);
  for (const char* f : {"bounding_box_train/0002_c1s1_000001_00.jpg", "bounding_box_train/0002_c2s1_000002_00.jpg",
                        "query/0005_c1s1_000003_00.jpg", "bounding_box_test/0005_c2s1_000004_00.jpg",
                        "bounding_box_test/-1_c1s1_000005_00.jpg", "bounding_box_test/notes.txt"}) {
    write_file(dir / f, "");
  }
  const auto split = ingest_market_directory(dir);
  CHECK(split.train.size() == 2);
  CHECK(split.query.size() == 1);
  CHECK(split.gallery.size() == 2);
  CHECK(split.class_index.num_classes() == 1);
  CHECK_THROWS_AS(ingest_market_directory(dir / "nope"), DataError);
}
