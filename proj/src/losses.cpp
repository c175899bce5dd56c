#include "greyreid/losses.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

#include "greyreid/errors.hpp"

namespace greyreid {

std::string reduction_name(Reduction r) { return r == Reduction::kMean ? "mean" : "sum"; }

Reduction parse_reduction(const std::string& name) {
  if (name == "mean") return Reduction::kMean;
  if (name == "sum") return Reduction::kSum;
  throw ConfigError("unknown reduction '" + name + "' (expected mean or sum)");
}

void LossConfig::validate() const {
  auto ok = [](double v) { return std::isfinite(v) && v >= 0.0; };
  if (!ok(lambda)) throw ConfigError("loss.lambda must be finite and non-negative");
  if (!ok(margin)) throw ConfigError("loss.margin must be finite and non-negative");
  for (double w : {weights.grey, weights.rgb, weights.joint, weights.global}) {
    if (!ok(w)) throw ConfigError("loss branch weights must be finite and non-negative");
  }
}

void to_json(nlohmann::json& j, const LossConfig& c) {
  j = nlohmann::json{{"lambda", c.lambda},
                     {"margin", c.margin},
                     {"triplet_reduction", reduction_name(c.reduction)},
                     {"branch_weights",
                      {{"grey", c.weights.grey},
                       {"rgb", c.weights.rgb},
                       {"joint", c.weights.joint},
                       {"global", c.weights.global}}}};
}

void from_json(const nlohmann::json& j, LossConfig& c) {
  c.lambda = j.at("lambda").get<double>();
  c.margin = j.at("margin").get<double>();
  c.reduction = parse_reduction(j.at("triplet_reduction").get<std::string>());
  const auto& w = j.at("branch_weights");
  c.weights.grey = w.at("grey").get<double>();
  c.weights.rgb = w.at("rgb").get<double>();
  c.weights.joint = w.at("joint").get<double>();
  c.weights.global = w.at("global").get<double>();
}

double cross_entropy(const RowMatrixD& logits, std::span<const int> labels, Reduction reduction, RowMatrixD* grad) {
  const int N = static_cast<int>(logits.rows()), C = static_cast<int>(logits.cols());
  if (static_cast<int>(labels.size()) != N) throw std::invalid_argument("cross_entropy: label count != rows");
  if (!logits.allFinite()) throw NumericError("cross_entropy: non-finite logits");
  const double scale = reduction == Reduction::kMean ? 1.0 / N : 1.0;
  if (grad) grad->setZero(N, C);
  double loss = 0.0;
  for (int i = 0; i < N; ++i) {
    const int y = labels[i];
    if (y < 0 || y >= C) {
      throw std::invalid_argument("cross_entropy: label " + std::to_string(y) + " outside [0, " + std::to_string(C) +
                                  ")");
    }
    const double mx = logits.row(i).maxCoeff();
    const Eigen::RowVectorXd e = (logits.row(i).array() - mx).exp();
    const double z = e.sum();
    loss += std::log(z) - (logits(i, y) - mx);
    if (grad) {
      grad->row(i) = e / z * scale;
      (*grad)(i, y) -= scale;
    }
  }
  return loss * scale;
}

double batch_hard_triplet(const RowMatrixD& emb, std::span<const int> labels, double margin, Reduction reduction,
                          RowMatrixD* grad) {
  const int N = static_cast<int>(emb.rows());
  if (static_cast<int>(labels.size()) != N) throw std::invalid_argument("batch_hard_triplet: label count != rows");
  std::map<int, int> counts;
  for (int l : labels) ++counts[l];
  if (counts.size() < 2) throw std::invalid_argument("batch_hard_triplet: batch needs at least two labels");
  for (const auto& [label, n] : counts) {
    if (n < 2) {
      throw std::invalid_argument("batch_hard_triplet: label " + std::to_string(label) + " occurs only once");
    }
  }
  if (!emb.allFinite()) throw NumericError("batch_hard_triplet: non-finite embeddings");

  Eigen::MatrixXd dist(N, N);
  for (int i = 0; i < N; ++i) {
    dist(i, i) = 0.0;
    for (int j = i + 1; j < N; ++j) dist(i, j) = dist(j, i) = (emb.row(i) - emb.row(j)).norm();
  }

  const double scale = reduction == Reduction::kMean ? 1.0 / N : 1.0;
  if (grad) grad->setZero(emb.rows(), emb.cols());
  double loss = 0.0;
  for (int a = 0; a < N; ++a) {
    int pos = -1, neg = -1;
    for (int j = 0; j < N; ++j) {
      if (j == a) continue;
      if (labels[j] == labels[a]) {
        if (pos < 0 || dist(a, j) > dist(a, pos)) pos = j;
      } else if (neg < 0 || dist(a, j) < dist(a, neg)) {
        neg = j;
      }
    }
    const double hinge = margin + dist(a, pos) - dist(a, neg);
    if (hinge <= 0.0) continue;
    loss += hinge;
    if (!grad) continue;
    if (dist(a, pos) > 0.0) {
      const Eigen::RowVectorXd u = (emb.row(a) - emb.row(pos)) / dist(a, pos) * scale;
      grad->row(a) += u;
      grad->row(pos) -= u;
    }
    if (dist(a, neg) > 0.0) {
      const Eigen::RowVectorXd v = (emb.row(a) - emb.row(neg)) / dist(a, neg) * scale;
      grad->row(a) -= v;
      grad->row(neg) += v;
    }
  }
  return loss * scale;
}

BranchLossValue branch_loss(const RowMatrixD& logits, const RowMatrixD& emb, std::span<const int> labels,
                            const LossConfig& cfg, RowMatrixD* grad_logits, RowMatrixD* grad_emb) {
  BranchLossValue v;
  v.ce = cross_entropy(logits, labels, Reduction::kMean, grad_logits);
  if (cfg.lambda > 0.0) {
    v.triplet = batch_hard_triplet(emb, labels, cfg.margin, cfg.reduction, grad_emb);
    if (grad_emb) *grad_emb *= cfg.lambda;
  } else if (grad_emb) {
    grad_emb->setZero(emb.rows(), emb.cols());
  }
  v.total = v.ce + cfg.lambda * v.triplet;
  return v;
}

const HeadLoss& LossReport::head(const std::string& name) const {
  for (const auto& h : heads) {
    if (h.name == name) return h;
  }
  throw std::out_of_range("no loss head named " + name);
}

LossReport total_loss(const NetworkOutput& out, std::span<const int> labels, const LossConfig& cfg,
                      OutputGrads* grads) {
  cfg.validate();
  const std::size_t n_parts = out.emb_parts.size();
  if (n_parts == 0 || out.logits_parts.size() != n_parts) {
    throw std::invalid_argument("total_loss: network output is missing part heads");
  }
  LossReport report;
  auto as_double = [](const RowMatrixF& m) -> RowMatrixD { return m.cast<double>(); };
  auto scaled = [](const RowMatrixD& g, double w) -> RowMatrixF { return (g * w).cast<float>(); };

  auto full_head = [&](const std::string& name, double w, const RowMatrixF& logits, const RowMatrixF& emb,
                       RowMatrixF* g_logits, RowMatrixF* g_emb) {
    RowMatrixD gl, ge;
    const bool want = g_logits && w > 0.0;
    const BranchLossValue v =
        branch_loss(as_double(logits), as_double(emb), labels, cfg, want ? &gl : nullptr, want ? &ge : nullptr);
    if (want) {
      *g_logits = scaled(gl, w);
      *g_emb = scaled(ge, w);
    }
    report.heads.push_back({name, w, v.ce, v.triplet, v.total});
  };

  full_head("grey", cfg.weights.grey, out.logits_grey, out.emb_grey, grads ? &grads->logits_grey : nullptr,
            grads ? &grads->emb_grey : nullptr);
  full_head("rgb", cfg.weights.rgb, out.logits_rgb, out.emb_rgb, grads ? &grads->logits_rgb : nullptr,
            grads ? &grads->emb_rgb : nullptr);

  if (grads) grads->logits_parts.assign(n_parts, RowMatrixF());
  for (std::size_t p = 0; p < n_parts; ++p) {
    const double w = cfg.weights.joint;
    RowMatrixD gl;
    const bool want = grads && w > 0.0;
    const double ce = cross_entropy(as_double(out.logits_parts[p]), labels, Reduction::kMean, want ? &gl : nullptr);
    if (want) grads->logits_parts[p] = scaled(gl, w);
    report.heads.push_back({"part" + std::to_string(p), w, ce, 0.0, ce});
  }
  {
    const double w = cfg.weights.joint;
    double triplet = 0.0;
    RowMatrixD ge;
    const bool want = grads && w > 0.0 && cfg.lambda > 0.0;
    if (cfg.lambda > 0.0) {
      triplet = batch_hard_triplet(as_double(out.emb_joint), labels, cfg.margin, cfg.reduction, want ? &ge : nullptr);
    }
    if (want) grads->emb_joint = scaled(ge, w * cfg.lambda);
    report.heads.push_back({"joint", w, 0.0, triplet, cfg.lambda * triplet});
  }
  full_head("global", cfg.weights.global, out.logits_global, out.emb_global, grads ? &grads->logits_global : nullptr,
            grads ? &grads->emb_global : nullptr);

  for (const auto& h : report.heads) report.total += h.weight * h.total;
  return report;
}

}  // namespace greyreid
