// Brute-force reference implementations and numeric helpers shared by the
// unit tests and the acceptance binary. Written independently of the
// library code they check: plain loops, no shared helpers.
#ifndef GREYREID_TESTS_ORACLES_HPP_
#define GREYREID_TESTS_ORACLES_HPP_

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "greyreid/eval.hpp"
#include "greyreid/tensor.hpp"

namespace oracle {

inline double euclid(const greyreid::RowMatrixD& e, int i, int j) {
  double s = 0;
  for (int k = 0; k < e.cols(); ++k) {
    const double d = e(i, k) - e(j, k);
    s += d * d;
  }
  return std::sqrt(s);
}

// Per-anchor hinge over every pair, hardest positive/negative found by
// exhaustive enumeration.
inline double triplet(const greyreid::RowMatrixD& e, const std::vector<int>& labels, double margin, bool sum) {
  const int n = static_cast<int>(labels.size());
  double total = 0;
  for (int a = 0; a < n; ++a) {
    double hp = -1, hn = 1e300;
    for (int j = 0; j < n; ++j) {
      if (j == a) continue;
      const double d = euclid(e, a, j);
      if (labels[j] == labels[a]) hp = std::max(hp, d);
      else hn = std::min(hn, d);
    }
    total += std::max(0.0, margin + hp - hn);
  }
  return sum ? total : total / n;
}

inline double cross_entropy_row(const std::vector<double>& z, int label) {
  double mx = z[0];
  for (double v : z) mx = std::max(mx, v);
  double s = 0;
  for (double v : z) s += std::exp(v - mx);
  return -(z[label] - mx - std::log(s));
}

struct NaiveEval {
  std::vector<double> cmc;
  double map = 0;
  int valid = 0;
  int excluded = 0;
};

// Single-query protocol evaluated by sorting (distance, index) pairs and
// counting by hand.
inline NaiveEval evaluate(const greyreid::RowMatrixD& dist, const std::vector<greyreid::RecordMeta>& q,
                          const std::vector<greyreid::RecordMeta>& g, int max_rank) {
  NaiveEval r;
  r.cmc.assign(max_rank, 0.0);
  double ap_sum = 0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    std::vector<std::pair<double, int>> order;
    for (std::size_t j = 0; j < g.size(); ++j) {
      if (g[j].person_id == -1) continue;
      if (g[j].person_id == q[i].person_id && g[j].camera_id == q[i].camera_id) continue;
      order.emplace_back(dist(i, j), static_cast<int>(j));
    }
    std::sort(order.begin(), order.end());
    int hits = 0, first = -1;
    double ap = 0;
    for (std::size_t k = 0; k < order.size(); ++k) {
      if (g[order[k].second].person_id == q[i].person_id) {
        ++hits;
        ap += static_cast<double>(hits) / static_cast<double>(k + 1);
        if (first < 0) first = static_cast<int>(k);
      }
    }
    if (hits == 0) {
      ++r.excluded;
      continue;
    }
    ++r.valid;
    ap_sum += ap / hits;
    for (int k = first; k < max_rank; ++k) r.cmc[k] += 1;
  }
  for (double& c : r.cmc) c = r.valid ? c / r.valid : 0.0;
  r.map = r.valid ? ap_sum / r.valid : 0.0;
  return r;
}

// Central difference of f at x along every coordinate.
inline greyreid::RowMatrixD numeric_grad(const std::function<double(const greyreid::RowMatrixD&)>& f,
                                         greyreid::RowMatrixD x, double h) {
  greyreid::RowMatrixD g(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double v = x.data()[i];
    x.data()[i] = v + h;
    const double fp = f(x);
    x.data()[i] = v - h;
    const double fm = f(x);
    x.data()[i] = v;
    g.data()[i] = (fp - fm) / (2 * h);
  }
  return g;
}

// max |a-b| / max(1, |a|, |b|) over entries.
inline double rel_error(const greyreid::RowMatrixD& a, const greyreid::RowMatrixD& b) {
  double worst = 0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double x = a.data()[i], y = b.data()[i];
    worst = std::max(worst, std::abs(x - y) / std::max({1.0, std::abs(x), std::abs(y)}));
  }
  return worst;
}

inline greyreid::RowMatrixD random_matrix(int r, int c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  greyreid::RowMatrixD m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = nd(rng);
  return m;
}

inline greyreid::Tensor random_tensor(std::vector<int> shape, std::mt19937_64& rng, float scale = 1.0f) {
  greyreid::Tensor t(std::move(shape));
  std::normal_distribution<float> nd(0.0f, scale);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = nd(rng);
  return t;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("greyreid_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace oracle

#endif  // GREYREID_TESTS_ORACLES_HPP_
