#include "doctest.h"
#include "oracles.hpp"

#include "greyreid/errors.hpp"
#include "greyreid/eval.hpp"

using namespace greyreid;

namespace {

std::vector<RecordMeta> metas(std::initializer_list<std::pair<int, int>> v) {
  std::vector<RecordMeta> m;
  for (auto [p, c] : v) m.push_back({p, c});
  return m;
}

}  // namespace

TEST_CASE("distance matrix") {
  RowMatrixF q(1, 2), g(1, 2);
  q << 0, 0;
  g << 3, 4;
  CHECK(distance_matrix(q, g)(0, 0) == 5.0);
  std::mt19937_64 rng(1);
  const RowMatrixF a = oracle::random_matrix(3, 2, rng).cast<float>();
  const RowMatrixD d = distance_matrix(a, a);
  for (int i = 0; i < 3; ++i) {
    CHECK(d(i, i) == 0.0);
    for (int j = 0; j < 3; ++j) CHECK(d(i, j) == doctest::Approx(oracle::euclid(a.cast<double>(), i, j)));
  }
  CHECK_THROWS_AS(distance_matrix(a, RowMatrixF(2, 3)), ShapeError);
}

TEST_CASE("average precision hand values") {
  const bool a[] = {true, false, true};
  CHECK(average_precision(a) == doctest::Approx(0.833333).epsilon(1e-6));
  const bool b[] = {true, true, false, false};
  CHECK(average_precision(b) == 1.0);
  const bool c[] = {false, false, false, false, true};
  CHECK(average_precision(c) == doctest::Approx(0.2));
  const bool none[] = {false, false};
  CHECK_THROWS_AS(average_precision(none), std::invalid_argument);
}

TEST_CASE("filtering by id and camera") {
  // Query 0 (id 1, cam 1): gallery 0 is the same id+cam and is dropped.
  // Query 1 (id 2, cam 1): only positive shares its camera, so it is excluded.
  const auto qm = metas({{1, 1}, {2, 1}});
  const auto gm = metas({{1, 1}, {3, 2}, {1, 2}, {-1, 2}, {2, 1}});
  RowMatrixD d(2, 5);
  d << 0.0, 1.0, 2.0, 0.5, 0.1,
       1.0, 2.0, 3.0, 4.0, 5.0;
  const auto r = cmc_map(d, qm, gm, {5});
  CHECK(r.n_valid_queries == 1);
  CHECK(r.n_excluded == 1);
  CHECK_FALSE(r.valid[1]);
  // Filtered list for query 0: g4 (0.1, id 2), g1 (1.0, id 3), g2 (2.0, id 1).
  CHECK(r.rank(1) == 0.0);
  CHECK(r.rank(2) == 0.0);
  CHECK(r.rank(3) == 1.0);
  CHECK(r.map == doctest::Approx(1.0 / 3.0));
  const auto ranked = ranked_gallery(0, d, qm, gm);
  CHECK(ranked == std::vector<int>{4, 1, 2});
  const auto list = rank_list(0, d, qm, gm, 2);
  REQUIRE(list.size() == 2);
  CHECK(list[0].gallery_index == 4);
  CHECK_FALSE(list[0].match);
}

TEST_CASE("ties break by gallery index") {
  const auto qm = metas({{1, 1}});
  const auto gm = metas({{2, 2}, {1, 2}, {3, 2}});
  RowMatrixD d = RowMatrixD::Constant(1, 3, 1.0);
  CHECK(ranked_gallery(0, d, qm, gm) == std::vector<int>{0, 1, 2});
  CHECK(cmc_map(d, qm, gm, {3}).map == doctest::Approx(0.5));
}

TEST_CASE("perfect features") {
  const auto qm = metas({{1, 1}, {2, 1}, {3, 2}});
  const auto gm = metas({{1, 2}, {2, 2}, {3, 1}, {1, 3}, {4, 2}});
  RowMatrixD d(3, 5);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 5; ++j) d(i, j) = qm[i].person_id == gm[j].person_id ? 0.0 : 10.0 + j;
  }
  const auto r = cmc_map(d, qm, gm);
  CHECK(r.rank(1) == 1.0);
  CHECK(r.map == 1.0);
}

TEST_CASE("cmc and mAP match the naive reference") {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 30; ++t) {
    const int nq = 1 + static_cast<int>(rng() % 10), ng = 5 + static_cast<int>(rng() % 40);
    const int ids = 2 + static_cast<int>(rng() % 6);
    std::vector<RecordMeta> qm, gm;
    for (int i = 0; i < nq; ++i) qm.push_back({static_cast<int>(rng() % ids), 1 + static_cast<int>(rng() % 3)});
    for (int i = 0; i < ng; ++i) {
      const int pid = rng() % 10 == 0 ? -1 : static_cast<int>(rng() % ids);
      gm.push_back({pid, 1 + static_cast<int>(rng() % 3)});
    }
    // Coarse distances produce ties.
    RowMatrixD d(nq, ng);
    for (Eigen::Index i = 0; i < d.size(); ++i) d.data()[i] = static_cast<double>(rng() % 7);
    const auto r = cmc_map(d, qm, gm, {20});
    const auto o = oracle::evaluate(d, qm, gm, 20);
    CHECK(r.n_valid_queries == o.valid);
    CHECK(r.n_excluded == o.excluded);
    CHECK(r.map == doctest::Approx(o.map).epsilon(1e-12));
    for (int k = 0; k < 20; ++k) CHECK(r.cmc[k] == doctest::Approx(o.cmc[k]).epsilon(1e-12));
  }
}

TEST_CASE("cmc is monotone and bounded") {
  std::mt19937_64 rng(8);
  std::vector<RecordMeta> qm, gm;
  for (int i = 0; i < 20; ++i) qm.push_back({i % 5, 1});
  for (int i = 0; i < 60; ++i) gm.push_back({i % 5, 2});
  const RowMatrixD d = oracle::random_matrix(20, 60, rng).cwiseAbs();
  const auto r = cmc_map(d, qm, gm);
  for (std::size_t k = 1; k < r.cmc.size(); ++k) CHECK(r.cmc[k] >= r.cmc[k - 1]);
  CHECK(r.cmc.back() <= 1.0);
  CHECK(r.map > 0.0);
  CHECK(r.map <= 1.0);
  CHECK(r.rank(1) >= r.map * 0.0);
}

TEST_CASE("random ranking gives mAP near the positive fraction") {
  std::mt19937_64 rng(9);
  std::vector<RecordMeta> qm, gm;
  for (int i = 0; i < 400; ++i) qm.push_back({i % 10, 1});
  for (int i = 0; i < 500; ++i) gm.push_back({i % 10, 2});
  RowMatrixD d(400, 500);
  std::uniform_real_distribution<double> u(0, 1);
  for (Eigen::Index i = 0; i < d.size(); ++i) d.data()[i] = u(rng);
  const auto r = cmc_map(d, qm, gm);
  // Expected AP under a random permutation with 50 of 500 positive is ~0.1 plus a small-sample bias.
  CHECK(r.map > 0.09);
  CHECK(r.map < 0.13);
  CHECK(r.rank(1) == doctest::Approx(0.1).epsilon(0.3));
}

TEST_CASE("ablation rows") {
  std::mt19937_64 rng(10);
  std::vector<RecordMeta> qm, gm;
  for (int i = 0; i < 6; ++i) qm.push_back({i % 3, 1});
  for (int i = 0; i < 12; ++i) gm.push_back({i % 3, 2});
  const RowMatrixF q = oracle::random_matrix(6, 9, rng).cast<float>();
  const RowMatrixF g = oracle::random_matrix(12, 9, rng).cast<float>();
  const auto rows = branch_ablation(q, g, qm, gm, 2, 3, 4);
  REQUIRE(rows.size() == 7);
  CHECK(rows[0].name == "Grey");
  CHECK(rows[6].name == "Grey+RGB+Joint");
  const auto full = cmc_map(distance_matrix(q, g), qm, gm);
  CHECK(rows[6].result.map == full.map);
  const auto grey = cmc_map(distance_matrix(q.leftCols(2), g.leftCols(2)), qm, gm);
  CHECK(rows[0].result.map == grey.map);
  const std::string csv = format_ablation(rows);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 8);
}
