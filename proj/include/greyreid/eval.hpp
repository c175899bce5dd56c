#ifndef GREYREID_EVAL_HPP_
#define GREYREID_EVAL_HPP_

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "greyreid/dataset.hpp"
#include "greyreid/tensor.hpp"

namespace greyreid {

struct RecordMeta {
  int person_id = 0;
  int camera_id = 0;
};

std::vector<RecordMeta> meta_of(const std::vector<ImageRecord>& records);

/// Single-query protocol: per query, gallery entries with the query's id
/// and camera are dropped, as are junk ids. Distance is Euclidean.
struct EvalProtocol {
  int max_rank = 50;
};

struct EvalResult {
  std::vector<double> cmc;           // cmc[k-1] = CMC(k)
  double map = 0.0;                  // mean of per_query_ap over valid queries
  std::vector<double> per_query_ap;  // 0 for excluded queries
  std::vector<bool> valid;           // false: no positive left after filtering
  int n_valid_queries = 0;
  int n_excluded = 0;

  double rank(int k) const { return cmc.at(k - 1); }
};

// q x g Euclidean distances. Throws ShapeError if the dims differ.
RowMatrixD distance_matrix(const RowMatrixF& query, const RowMatrixF& gallery);

// Mean over relevant positions of (relevant items up to that position) / position.
// Throws std::invalid_argument when there is no relevant item.
double average_precision(std::span<const bool> ranked_flags);

// Gallery indices for one query after filtering, nearest first; ties are
// broken by ascending gallery index. Shared by cmc_map and rank_list.
std::vector<int> ranked_gallery(int query_index, const RowMatrixD& dist, std::span<const RecordMeta> query_meta,
                                std::span<const RecordMeta> gallery_meta);

EvalResult cmc_map(const RowMatrixD& dist, std::span<const RecordMeta> query_meta,
                   std::span<const RecordMeta> gallery_meta, const EvalProtocol& protocol = {});

struct RankEntry {
  int gallery_index = 0;
  double distance = 0.0;
  bool match = false;
};

std::vector<RankEntry> rank_list(int query_index, const RowMatrixD& dist, std::span<const RecordMeta> query_meta,
                                 std::span<const RecordMeta> gallery_meta, int k);

// Text report: rank-1/5/10/20, mAP, valid and excluded query counts.
std::string format_report(const EvalResult& r);

/// One row of a branch-combination comparison.
struct AblationRow {
  std::string name;  // e.g. "Grey+RGB+Joint"
  EvalResult result;
};

// Evaluates all seven non-empty combinations of the grey/rgb/joint column
// blocks of global features laid out as [grey | rgb | joint].
std::vector<AblationRow> branch_ablation(const RowMatrixF& query, const RowMatrixF& gallery,
                                         std::span<const RecordMeta> query_meta,
                                         std::span<const RecordMeta> gallery_meta, int dim_grey, int dim_rgb,
                                         int dim_joint, const EvalProtocol& protocol = {});

std::string format_ablation(const std::vector<AblationRow>& rows);

}  // namespace greyreid

#endif  // GREYREID_EVAL_HPP_
