#include <fstream>

#include "doctest.h"
#include "oracles.hpp"

#include "greyreid/config.hpp"
#include "greyreid/errors.hpp"

using namespace greyreid;

TEST_CASE("defaults follow the training protocol") {
  const RunConfig c;
  const auto t = c.train();
  CHECK(t.epochs == 300);
  CHECK(t.P == 32);
  CHECK(t.K == 4);
  CHECK(lr_at(150, t.lr_schedule, t.epochs) == 0.001);
  CHECK(t.momentum == 0.9);
  CHECK(t.weight_decay == 5e-4);
  CHECK(c.loss().margin == 0.3);
  const auto n = c.network();
  CHECK(n.backbone == BackboneKind::kStandard50);
  CHECK(n.global_dim() == 1280);
  CHECK(n.final_stride_one);
  const auto a = c.augment();
  CHECK(a.height == 384);
  CHECK(a.width == 128);
  CHECK(a.mean[0] == doctest::Approx(0.485));
  CHECK_FALSE(c.extract().l2_normalize);
}

TEST_CASE("overrides") {
  RunConfig c;
  c.set_assignment("loss.lambda=0.5");
  c.set("network.fusion", "multiply");
  c.set("train.lr_schedule", "[[0, 0.1], [10, 0.01]]");
  c.set("network.backbone", "toy-cnn");
  CHECK(c.loss().lambda == 0.5);
  CHECK(c.network().fusion == Fusion::kMultiply);
  CHECK(c.train().lr_schedule.size() == 2);
  CHECK(c.augment().mean[0] == 0.5f);  // toy normalization
  CHECK(c.json().at("loss").at("lambda") == 0.5);
  CHECK_THROWS_AS(c.set("loss.lamda", "1"), ConfigError);
  CHECK_THROWS_AS(c.set("loss.lambda", "\"big\""), ConfigError);
  CHECK_THROWS_AS(c.set("train.epochs", "[1]"), ConfigError);
  CHECK_THROWS_AS(c.set_assignment("novalue"), ConfigError);
  c.set("loss.branch_weights.global", "0");
  CHECK(c.loss().weights.global == 0.0);
  c.set("augment.grey_weights", "average");
  CHECK(c.augment().grey.r == doctest::Approx(1.0 / 3));
  c.set("augment.grey_weights", "hsv");
  CHECK_THROWS_AS(c.augment(), ConfigError);
}

TEST_CASE("config files merge and echo") {
  const auto dir = oracle::temp_dir("config");
  std::ofstream(dir / "c.json") << R"({"seed": 5, "train": {"epochs": 40, "lr_schedule": [[0, 0.05], [30, 0.005]], "P": 4}, "eval": {"max_rank": 10}})";
  RunConfig c;
  c.merge_file(dir / "c.json");
  CHECK(c.seed() == 5);
  CHECK(c.train().epochs == 40);
  CHECK(c.train().K == 4);
  CHECK(c.eval().max_rank == 10);
  c.write_to(dir / "run");
  RunConfig back;
  back.merge_file(dir / "run" / "resolved_config.json");
  CHECK(back.json() == c.json());
  std::ofstream(dir / "bad.json") << R"({"train": {"epochz": 1}})";
  CHECK_THROWS_AS(RunConfig().merge_file(dir / "bad.json"), ConfigError);
  std::ofstream(dir / "broken.json") << "{";
  CHECK_THROWS_AS(RunConfig().merge_file(dir / "broken.json"), ConfigError);
}
