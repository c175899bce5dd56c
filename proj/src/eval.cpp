#include "greyreid/eval.hpp"

#include <algorithm>
#include <memory>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "greyreid/errors.hpp"

namespace greyreid {

std::vector<RecordMeta> meta_of(const std::vector<ImageRecord>& records) {
  std::vector<RecordMeta> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back({r.person_id(), r.camera_id()});
  return out;
}

RowMatrixD distance_matrix(const RowMatrixF& query, const RowMatrixF& gallery) {
  if (query.cols() != gallery.cols()) {
    throw ShapeError("distance_matrix: query dim " + std::to_string(query.cols()) + " != gallery dim " +
                     std::to_string(gallery.cols()));
  }
  const RowMatrixD g = gallery.cast<double>();
  RowMatrixD dist(query.rows(), gallery.rows());
  for (Eigen::Index i = 0; i < query.rows(); ++i) {
    const Eigen::RowVectorXd q = query.row(i).cast<double>();
    dist.row(i) = (g.rowwise() - q).rowwise().norm().transpose();
  }
  return dist;
}

double average_precision(std::span<const bool> ranked_flags) {
  double sum = 0.0;
  int hits = 0;
  for (std::size_t i = 0; i < ranked_flags.size(); ++i) {
    if (!ranked_flags[i]) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(i + 1);
  }
  if (hits == 0) throw std::invalid_argument("average_precision: no relevant item");
  return sum / hits;
}

std::vector<int> ranked_gallery(int query_index, const RowMatrixD& dist, std::span<const RecordMeta> query_meta,
                                std::span<const RecordMeta> gallery_meta) {
  if (query_index < 0 || query_index >= static_cast<int>(query_meta.size()) || query_index >= dist.rows()) {
    throw std::out_of_range("query index " + std::to_string(query_index) + " out of range");
  }
  if (dist.cols() != static_cast<Eigen::Index>(gallery_meta.size())) {
    throw ShapeError("distance matrix has " + std::to_string(dist.cols()) + " columns for " +
                     std::to_string(gallery_meta.size()) + " gallery records");
  }
  const RecordMeta& q = query_meta[query_index];
  std::vector<int> order;
  for (int j = 0; j < static_cast<int>(gallery_meta.size()); ++j) {
    const RecordMeta& g = gallery_meta[j];
    if (g.person_id == kJunkPersonId) continue;
    if (g.person_id == q.person_id && g.camera_id == q.camera_id) continue;
    order.push_back(j);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return dist(query_index, a) < dist(query_index, b); });
  return order;
}

EvalResult cmc_map(const RowMatrixD& dist, std::span<const RecordMeta> query_meta,
                   std::span<const RecordMeta> gallery_meta, const EvalProtocol& protocol) {
  if (dist.rows() != static_cast<Eigen::Index>(query_meta.size())) {
    throw ShapeError("distance matrix rows do not match query metadata");
  }
  if (protocol.max_rank < 1) throw ConfigError("eval.max_rank must be positive");
  EvalResult r;
  r.cmc.assign(protocol.max_rank, 0.0);
  r.per_query_ap.assign(query_meta.size(), 0.0);
  r.valid.assign(query_meta.size(), false);
  double ap_sum = 0.0;
  for (int i = 0; i < static_cast<int>(query_meta.size()); ++i) {
    const std::vector<int> order = ranked_gallery(i, dist, query_meta, gallery_meta);
    // std::vector<bool> is not contiguous, so flags live in a plain array.
    std::unique_ptr<bool[]> flags(new bool[order.size()]);
    int first = -1;
    for (std::size_t k = 0; k < order.size(); ++k) {
      flags[k] = gallery_meta[order[k]].person_id == query_meta[i].person_id;
      if (flags[k] && first < 0) first = static_cast<int>(k);
    }
    if (first < 0 || query_meta[i].person_id == kJunkPersonId) {
      ++r.n_excluded;
      continue;
    }
    const double ap = average_precision(std::span<const bool>(flags.get(), order.size()));
    r.per_query_ap[i] = ap;
    r.valid[i] = true;
    ap_sum += ap;
    ++r.n_valid_queries;
    for (int k = first; k < protocol.max_rank; ++k) r.cmc[k] += 1.0;
  }
  if (r.n_valid_queries > 0) {
    for (auto& c : r.cmc) c /= r.n_valid_queries;
    r.map = ap_sum / r.n_valid_queries;
  }
  return r;
}

std::vector<RankEntry> rank_list(int query_index, const RowMatrixD& dist, std::span<const RecordMeta> query_meta,
                                 std::span<const RecordMeta> gallery_meta, int k) {
  const std::vector<int> order = ranked_gallery(query_index, dist, query_meta, gallery_meta);
  if (k < 0 || k > static_cast<int>(order.size())) {
    throw std::invalid_argument("rank_list: k=" + std::to_string(k) + " exceeds the " +
                                std::to_string(order.size()) + " valid gallery entries");
  }
  std::vector<RankEntry> out;
  for (int r = 0; r < k; ++r) {
    const int j = order[r];
    out.push_back({j, dist(query_index, j), gallery_meta[j].person_id == query_meta[query_index].person_id});
  }
  return out;
}

std::string format_report(const EvalResult& r) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(6);
  for (int k : {1, 5, 10, 20}) {
    os << "rank" << k << "=" << (k <= static_cast<int>(r.cmc.size()) ? r.rank(k) : r.cmc.back()) << '\n';
  }
  os << "map=" << r.map << '\n';
  os << "n_valid_queries=" << r.n_valid_queries << '\n';
  os << "n_excluded_queries=" << r.n_excluded << '\n';
  return os.str();
}

namespace {

RowMatrixF select_blocks(const RowMatrixF& m, const std::vector<std::pair<int, int>>& blocks) {
  int cols = 0;
  for (const auto& [b, e] : blocks) cols += e - b;
  RowMatrixF out(m.rows(), cols);
  int at = 0;
  for (const auto& [b, e] : blocks) {
    out.middleCols(at, e - b) = m.middleCols(b, e - b);
    at += e - b;
  }
  return out;
}

}  // namespace

std::vector<AblationRow> branch_ablation(const RowMatrixF& query, const RowMatrixF& gallery,
                                         std::span<const RecordMeta> query_meta,
                                         std::span<const RecordMeta> gallery_meta, int dim_grey, int dim_rgb,
                                         int dim_joint, const EvalProtocol& protocol) {
  const int total = dim_grey + dim_rgb + dim_joint;
  if (query.cols() != total || gallery.cols() != total) {
    throw ShapeError("ablation needs global features of dim " + std::to_string(total) + ", got " +
                     std::to_string(query.cols()) + " / " + std::to_string(gallery.cols()));
  }
  const std::pair<int, int> grey{0, dim_grey}, rgb{dim_grey, dim_grey + dim_rgb}, joint{dim_grey + dim_rgb, total};
  const std::vector<std::pair<std::string, std::vector<std::pair<int, int>>>> combos = {
      {"Grey", {grey}},
      {"RGB", {rgb}},
      {"Joint", {joint}},
      {"Grey+RGB", {grey, rgb}},
      {"Grey+Joint", {grey, joint}},
      {"RGB+Joint", {rgb, joint}},
      {"Grey+RGB+Joint", {grey, rgb, joint}},
  };
  std::vector<AblationRow> rows;
  for (const auto& [name, blocks] : combos) {
    const RowMatrixD dist = distance_matrix(select_blocks(query, blocks), select_blocks(gallery, blocks));
    rows.push_back({name, cmc_map(dist, query_meta, gallery_meta, protocol)});
  }
  return rows;
}

std::string format_ablation(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os << "# features,map,rank1,rank5,rank10\n";
  for (const auto& row : rows) {
    char buf[160];
    const auto& c = row.result.cmc;
    auto at = [&](int k) { return k <= static_cast<int>(c.size()) ? c[k - 1] : c.back(); };
    std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%.6f,%.6f\n", row.name.c_str(), row.result.map, at(1), at(5),
                  at(10));
    os << buf;
  }
  return os.str();
}

}  // namespace greyreid
