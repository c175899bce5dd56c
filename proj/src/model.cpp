#include "greyreid/model.hpp"

#include <algorithm>
#include <cmath>

#include "greyreid/errors.hpp"
#include "greyreid/rng.hpp"

namespace greyreid {

std::string fusion_name(Fusion f) {
  switch (f) {
    case Fusion::kPlus: return "plus";
    case Fusion::kMultiply: return "multiply";
    case Fusion::kConcat: return "concat";
  }
  return "?";
}

Fusion parse_fusion(const std::string& name) {
  if (name == "plus") return Fusion::kPlus;
  if (name == "multiply") return Fusion::kMultiply;
  if (name == "concat") return Fusion::kConcat;
  throw ConfigError("unknown fusion '" + name + "' (expected plus, multiply or concat)");
}

void NetworkConfig::validate() const {
  if (num_classes < 1) throw ConfigError("network.num_classes must be positive");
  if (dim_grey < 1 || dim_rgb < 1 || dim_joint < 1) throw ConfigError("embedding dims must be positive");
  if (n_parts < 1) throw ConfigError("network.n_parts must be positive");
  if (dim_joint % n_parts != 0) throw ConfigError("joint dim must be divisible by n_parts");
}

void to_json(nlohmann::json& j, const NetworkConfig& c) {
  j = nlohmann::json{{"backbone", backbone_name(c.backbone)},
                     {"num_classes", c.num_classes},
                     {"dim_grey", c.dim_grey},
                     {"dim_rgb", c.dim_rgb},
                     {"dim_joint", c.dim_joint},
                     {"n_parts", c.n_parts},
                     {"fusion", fusion_name(c.fusion)},
                     {"final_stride_one", c.final_stride_one},
                     {"bn_neck", c.bn_neck},
                     {"toy_channels", c.toy_channels}};
}

void from_json(const nlohmann::json& j, NetworkConfig& c) {
  c.backbone = parse_backbone(j.at("backbone").get<std::string>());
  c.num_classes = j.at("num_classes").get<int>();
  c.dim_grey = j.at("dim_grey").get<int>();
  c.dim_rgb = j.at("dim_rgb").get<int>();
  c.dim_joint = j.at("dim_joint").get<int>();
  c.n_parts = j.at("n_parts").get<int>();
  c.fusion = parse_fusion(j.at("fusion").get<std::string>());
  c.final_stride_one = j.at("final_stride_one").get<bool>();
  c.bn_neck = j.at("bn_neck").get<bool>();
  c.toy_channels = j.at("toy_channels").get<int>();
}

std::string branch_name(Branch b) {
  switch (b) {
    case Branch::kGrey: return "grey";
    case Branch::kRgb: return "rgb";
    case Branch::kJoint: return "joint";
    case Branch::kGlobal: return "global";
  }
  return "?";
}

Branch parse_branch(const std::string& name) {
  if (name == "grey") return Branch::kGrey;
  if (name == "rgb") return Branch::kRgb;
  if (name == "joint") return Branch::kJoint;
  if (name == "global") return Branch::kGlobal;
  throw ConfigError("unknown branch '" + name + "' (expected grey, rgb, joint or global)");
}

std::pair<int, int> branch_columns(const NetworkConfig& cfg, Branch b) {
  switch (b) {
    case Branch::kGrey: return {0, cfg.dim_grey};
    case Branch::kRgb: return {cfg.dim_grey, cfg.dim_grey + cfg.dim_rgb};
    case Branch::kJoint: return {cfg.dim_grey + cfg.dim_rgb, cfg.global_dim()};
    case Branch::kGlobal: return {0, cfg.global_dim()};
  }
  return {0, 0};
}

// ----------------------------------------------------------------- fusion

Tensor fuse(const Tensor& t_rgb, const Tensor& t_grey, Fusion mode) {
  if (!t_rgb.same_shape(t_grey)) {
    throw ShapeError("fusion needs identical shapes, got " + shape_string(t_rgb.shape()) + " and " +
                     shape_string(t_grey.shape()));
  }
  Tensor out(t_rgb.shape());
  switch (mode) {
    case Fusion::kPlus:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = t_rgb[i] + t_grey[i];
      break;
    case Fusion::kMultiply:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = t_rgb[i] * t_grey[i];
      break;
    case Fusion::kConcat:
      throw ConfigError("concat fusion needs a FusionLayer (learned channel reduction)");
  }
  return out;
}

FusionLayer::FusionLayer(Fusion mode, int channels) : mode_(mode), channels_(channels) {
  if (mode_ == Fusion::kConcat) reduce_ = std::make_unique<nn::Conv2d>(2 * channels, channels, 1, 1, 0, true);
}

Tensor FusionLayer::forward(const Tensor& t_rgb, const Tensor& t_grey, bool train) {
  if (!t_rgb.same_shape(t_grey)) {
    throw ShapeError("fusion needs identical shapes, got " + shape_string(t_rgb.shape()) + " and " +
                     shape_string(t_grey.shape()));
  }
  if (mode_ != Fusion::kConcat) {
    if (mode_ == Fusion::kMultiply) {
      rgb_ = t_rgb;
      grey_ = t_grey;
    }
    return fuse(t_rgb, t_grey, mode_);
  }
  const int N = t_rgb.dim(0), C = t_rgb.dim(1), H = t_rgb.dim(2), W = t_rgb.dim(3);
  Tensor cat({N, 2 * C, H, W});
  const std::size_t block = static_cast<std::size_t>(C) * H * W;
  for (int n = 0; n < N; ++n) {
    std::copy(t_rgb.data() + n * block, t_rgb.data() + (n + 1) * block, cat.data() + 2 * n * block);
    std::copy(t_grey.data() + n * block, t_grey.data() + (n + 1) * block, cat.data() + (2 * n + 1) * block);
  }
  return reduce_->forward(cat, train);
}

std::pair<Tensor, Tensor> FusionLayer::backward(const Tensor& g) {
  switch (mode_) {
    case Fusion::kPlus: return {g, g};
    case Fusion::kMultiply: {
      Tensor g_rgb(g.shape()), g_grey(g.shape());
      for (std::size_t i = 0; i < g.size(); ++i) {
        g_rgb[i] = g[i] * grey_[i];
        g_grey[i] = g[i] * rgb_[i];
      }
      return {std::move(g_rgb), std::move(g_grey)};
    }
    case Fusion::kConcat: {
      const Tensor gcat = reduce_->backward(g);
      const int N = g.dim(0), C = g.dim(1), H = g.dim(2), W = g.dim(3);
      Tensor g_rgb({N, C, H, W}), g_grey({N, C, H, W});
      const std::size_t block = static_cast<std::size_t>(C) * H * W;
      for (int n = 0; n < N; ++n) {
        std::copy(gcat.data() + 2 * n * block, gcat.data() + (2 * n + 1) * block, g_rgb.data() + n * block);
        std::copy(gcat.data() + (2 * n + 1) * block, gcat.data() + (2 * n + 2) * block, g_grey.data() + n * block);
      }
      return {std::move(g_rgb), std::move(g_grey)};
    }
  }
  return {};
}

void FusionLayer::collect(const std::string& prefix, nn::StateRefs& refs) {
  if (reduce_) reduce_->collect(nn::join_name(prefix, "reduce"), refs);
}

void FusionLayer::init(std::mt19937_64& rng) {
  if (reduce_) reduce_->init(rng);
}

// ------------------------------------------------------------- part split

std::vector<Tensor> part_split(const Tensor& t, int n_parts) {
  if (t.ndim() != 4) throw ShapeError("part_split expects N x C x H x W, got " + shape_string(t.shape()));
  if (n_parts < 1 || t.dim(2) % n_parts != 0) {
    throw ShapeError("height " + std::to_string(t.dim(2)) + " is not divisible into " + std::to_string(n_parts) +
                     " parts");
  }
  const int N = t.dim(0), C = t.dim(1), H = t.dim(2), W = t.dim(3);
  const int band = H / n_parts;
  std::vector<Tensor> parts;
  for (int p = 0; p < n_parts; ++p) {
    Tensor part({N, C, band, W});
    for (int n = 0; n < N; ++n) {
      for (int c = 0; c < C; ++c) {
        const float* src = &t.at(n, c, p * band, 0);
        std::copy(src, src + static_cast<std::size_t>(band) * W, &part.at(n, c, 0, 0));
      }
    }
    parts.push_back(std::move(part));
  }
  return parts;
}

Tensor part_merge(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("part_merge needs at least one part");
  const int N = parts[0].dim(0), C = parts[0].dim(1), band = parts[0].dim(2), W = parts[0].dim(3);
  Tensor t({N, C, band * static_cast<int>(parts.size()), W});
  for (std::size_t p = 0; p < parts.size(); ++p) {
    if (!parts[p].same_shape(parts[0])) throw ShapeError("part_merge needs equally shaped parts");
    for (int n = 0; n < N; ++n) {
      for (int c = 0; c < C; ++c) {
        const float* src = &parts[p].at(n, c, 0, 0);
        std::copy(src, src + static_cast<std::size_t>(band) * W, &t.at(n, c, static_cast<int>(p) * band, 0));
      }
    }
  }
  return t;
}

// ---------------------------------------------------------- TwoStreamNet

TwoStreamNet::TwoStreamNet(const NetworkConfig& cfg)
    : cfg_(cfg),
      grey_backbone_(make_backbone(cfg.backbone, cfg.final_stride_one, cfg.toy_channels)),
      rgb_backbone_(make_backbone(cfg.backbone, cfg.final_stride_one, cfg.toy_channels)),
      fusion_(cfg.fusion, grey_backbone_->out_channels()) {
  cfg_.validate();
  const int C = grey_backbone_->out_channels();
  grey_head_ = make_head(C, cfg.dim_grey);
  rgb_head_ = make_head(C, cfg.dim_rgb);
  for (int p = 0; p < cfg.n_parts; ++p) part_heads_.push_back(make_head(C, cfg.part_dim()));
  global_classifier_ = std::make_unique<nn::Linear>(cfg.global_dim(), cfg.num_classes);
}

TwoStreamNet::Head TwoStreamNet::make_head(int in, int dim) const {
  Head h;
  h.fc = std::make_unique<nn::Linear>(in, dim);
  if (cfg_.bn_neck) h.bn = std::make_unique<nn::BatchNorm>(dim);
  h.classifier = std::make_unique<nn::Linear>(dim, cfg_.num_classes);
  return h;
}

void TwoStreamNet::init(std::uint64_t seed) {
  auto rng = derive_rng(seed, {kTagInit});
  grey_backbone_->init(rng);
  rgb_backbone_->init(rng);
  fusion_.init(rng);
  auto init_head = [&](Head& h) {
    h.fc->init(rng);
    if (h.bn) h.bn->init(rng);
    h.classifier->init(rng);
  };
  init_head(grey_head_);
  init_head(rgb_head_);
  for (auto& h : part_heads_) init_head(h);
  global_classifier_->init(rng);
}

RowMatrixF TwoStreamNet::classify(Head& h, const Tensor& emb, bool train) {
  const Tensor in = h.bn ? h.bn->forward(emb, train) : emb;
  return h.classifier->forward(in, train).matrix();
}

void TwoStreamNet::classifier_backward(Head& h, const RowMatrixF& grad_logits, RowMatrixF& grad_emb) {
  if (grad_logits.size() == 0) return;
  Tensor g = h.classifier->backward(Tensor::from_matrix(grad_logits));
  if (h.bn) g = h.bn->backward(g);
  grad_emb += g.matrix();
}

NetworkOutput TwoStreamNet::forward(const Tensor& rgb, const Tensor& grey, bool train) {
  if (!rgb.same_shape(grey)) {
    throw ShapeError("rgb and grey batches differ: " + shape_string(rgb.shape()) + " vs " +
                     shape_string(grey.shape()));
  }
  batch_ = rgb.dim(0);
  t_grey_ = grey_backbone_->forward(grey, train);
  t_rgb_ = rgb_backbone_->forward(rgb, train);

  NetworkOutput out;
  const Tensor emb_grey = grey_head_.fc->forward(nn::global_avg_pool(t_grey_), train);
  const Tensor emb_rgb = rgb_head_.fc->forward(nn::global_avg_pool(t_rgb_), train);
  out.emb_grey = emb_grey.matrix();
  out.emb_rgb = emb_rgb.matrix();
  out.logits_grey = classify(grey_head_, emb_grey, train);
  out.logits_rgb = classify(rgb_head_, emb_rgb, train);

  t_joint_ = fusion_.forward(t_rgb_, t_grey_, train);
  const std::vector<Tensor> parts = part_split(t_joint_, cfg_.n_parts);
  part_shapes_.clear();
  out.emb_joint.resize(batch_, cfg_.dim_joint);
  for (int p = 0; p < cfg_.n_parts; ++p) {
    part_shapes_.push_back(parts[p].shape());
    const Tensor emb = part_heads_[p].fc->forward(nn::global_avg_pool(parts[p]), train);
    out.emb_parts.push_back(emb.matrix());
    out.emb_joint.middleCols(p * cfg_.part_dim(), cfg_.part_dim()) = emb.matrix();
    out.logits_parts.push_back(classify(part_heads_[p], emb, train));
  }

  out.emb_global.resize(batch_, cfg_.global_dim());
  out.emb_global << out.emb_grey, out.emb_rgb, out.emb_joint;
  out.logits_global = global_classifier_->forward(Tensor::from_matrix(out.emb_global), train).matrix();
  return out;
}

void TwoStreamNet::backward(const OutputGrads& grads) {
  const int N = batch_;
  auto or_zero = [N](const RowMatrixF& m, int cols) -> RowMatrixF {
    return m.size() ? m : RowMatrixF::Zero(N, cols);
  };

  RowMatrixF g_global = or_zero(grads.emb_global, cfg_.global_dim());
  if (grads.logits_global.size()) {
    g_global += global_classifier_->backward(Tensor::from_matrix(grads.logits_global)).matrix();
  }

  RowMatrixF g_grey = or_zero(grads.emb_grey, cfg_.dim_grey) + g_global.leftCols(cfg_.dim_grey);
  RowMatrixF g_rgb = or_zero(grads.emb_rgb, cfg_.dim_rgb) + g_global.middleCols(cfg_.dim_grey, cfg_.dim_rgb);
  RowMatrixF g_joint = or_zero(grads.emb_joint, cfg_.dim_joint) + g_global.rightCols(cfg_.dim_joint);
  classifier_backward(grey_head_, grads.logits_grey, g_grey);
  classifier_backward(rgb_head_, grads.logits_rgb, g_rgb);

  const auto grey_gap = grey_head_.fc->backward(Tensor::from_matrix(g_grey));
  Tensor g_t_grey = nn::global_avg_pool_backward(grey_gap, t_grey_.shape());
  const auto rgb_gap = rgb_head_.fc->backward(Tensor::from_matrix(g_rgb));
  Tensor g_t_rgb = nn::global_avg_pool_backward(rgb_gap, t_rgb_.shape());

  std::vector<Tensor> g_parts;
  for (int p = 0; p < cfg_.n_parts; ++p) {
    RowMatrixF g_emb = g_joint.middleCols(p * cfg_.part_dim(), cfg_.part_dim());
    if (p < static_cast<int>(grads.emb_parts.size()) && grads.emb_parts[p].size()) g_emb += grads.emb_parts[p];
    if (p < static_cast<int>(grads.logits_parts.size())) {
      classifier_backward(part_heads_[p], grads.logits_parts[p], g_emb);
    }
    const auto g_gap = part_heads_[p].fc->backward(Tensor::from_matrix(g_emb));
    g_parts.push_back(nn::global_avg_pool_backward(g_gap, part_shapes_[p]));
  }
  auto [g_rgb_fused, g_grey_fused] = fusion_.backward(part_merge(g_parts));
  for (std::size_t i = 0; i < g_t_rgb.size(); ++i) {
    g_t_rgb[i] += g_rgb_fused[i];
    g_t_grey[i] += g_grey_fused[i];
  }
  rgb_backbone_->backward(g_t_rgb);
  grey_backbone_->backward(g_t_grey);
}

nn::StateRefs TwoStreamNet::state() {
  nn::StateRefs refs;
  grey_backbone_->collect("grey_backbone", refs);
  rgb_backbone_->collect("rgb_backbone", refs);
  fusion_.collect("fusion", refs);
  auto head = [&](Head& h, const std::string& name) {
    h.fc->collect("heads." + name + ".fc", refs);
    if (h.bn) h.bn->collect("heads." + name + ".bn", refs);
    h.classifier->collect("heads." + name + ".classifier", refs);
  };
  head(grey_head_, "grey");
  head(rgb_head_, "rgb");
  for (int p = 0; p < cfg_.n_parts; ++p) head(part_heads_[p], "part" + std::to_string(p));
  global_classifier_->collect("heads.global.classifier", refs);
  return refs;
}

void TwoStreamNet::zero_grad() {
  for (auto& p : state().params) p.grad->fill(0.0f);
}

// ------------------------------------------------------------ extraction

RowMatrixF extract_features(TwoStreamNet& net, const std::vector<ImageRecord>& records, ImageStore& store,
                            const AugmentConfig& aug, int batch_size, bool l2_normalize) {
  const int total = static_cast<int>(records.size());
  RowMatrixF feats(total, net.config().global_dim());
  const std::size_t per = static_cast<std::size_t>(3) * aug.height * aug.width;
  for (int begin = 0; begin < total; begin += batch_size) {
    const int end = std::min(total, begin + batch_size);
    Tensor rgb({end - begin, 3, aug.height, aug.width});
    Tensor grey({end - begin, 3, aug.height, aug.width});
    for (int i = begin; i < end; ++i) {
      const AugmentedPair pair = preprocess(store.get(records[i].image_path()), aug);
      std::copy(pair.rgb.data(), pair.rgb.data() + per, rgb.data() + (i - begin) * per);
      std::copy(pair.grey.data(), pair.grey.data() + per, grey.data() + (i - begin) * per);
    }
    const NetworkOutput out = net.forward(rgb, grey, false);
    feats.middleRows(begin, end - begin) = out.emb_global;
  }
  if (l2_normalize) {
    for (int r = 0; r < total; ++r) {
      const float n = feats.row(r).norm();
      if (n > 0) feats.row(r) /= n;
    }
  }
  return feats;
}

}  // namespace greyreid
