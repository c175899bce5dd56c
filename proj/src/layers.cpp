#include "greyreid/layers.hpp"

#include <cmath>
#include <limits>

#include "greyreid/errors.hpp"

namespace greyreid::nn {

namespace {

using MapF = Eigen::Map<RowMatrixF>;
using CMapF = Eigen::Map<const RowMatrixF>;

void im2col(const float* img, int C, int H, int W, int k, int stride, int pad, int Ho, int Wo, float* col) {
  for (int c = 0; c < C; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        float* dst = col + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * Ho * Wo;
        for (int oy = 0; oy < Ho; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= H) {
            std::fill(dst + oy * Wo, dst + (oy + 1) * Wo, 0.0f);
            continue;
          }
          const float* src = img + (static_cast<std::size_t>(c) * H + iy) * W;
          for (int ox = 0; ox < Wo; ++ox) {
            const int ix = ox * stride - pad + kx;
            dst[oy * Wo + ox] = (ix >= 0 && ix < W) ? src[ix] : 0.0f;
          }
        }
      }
    }
  }
}

void col2im(const float* col, int C, int H, int W, int k, int stride, int pad, int Ho, int Wo, float* img) {
  for (int c = 0; c < C; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const float* src = col + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * Ho * Wo;
        for (int oy = 0; oy < Ho; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= H) continue;
          float* dst = img + (static_cast<std::size_t>(c) * H + iy) * W;
          for (int ox = 0; ox < Wo; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < W) dst[ix] += src[oy * Wo + ox];
          }
        }
      }
    }
  }
}

void require_4d(const Tensor& x, const char* who) {
  if (x.ndim() != 4) throw ShapeError(std::string(who) + " expects N x C x H x W, got " + shape_string(x.shape()));
}

}  // namespace

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(int in_channels, int out_channels, int kernel, int stride, int pad, bool bias)
    : in_(in_channels),
      out_(out_channels),
      kernel_(kernel),
      stride_(stride),
      pad_(pad),
      has_bias_(bias),
      weight_({out_channels, in_channels * kernel * kernel}),
      grad_weight_({out_channels, in_channels * kernel * kernel}) {
  if (has_bias_) {
    bias_ = Tensor({out_channels});
    grad_bias_ = Tensor({out_channels});
  }
}

void Conv2d::init(std::mt19937_64& rng) {
  // He-normal on fan-in.
  const double std = std::sqrt(2.0 / (in_ * kernel_ * kernel_));
  std::normal_distribution<double> dist(0.0, std);
  for (auto& w : weight_.values()) w = static_cast<float>(dist(rng));
  if (has_bias_) bias_.fill(0.0f);
}

Tensor Conv2d::forward(const Tensor& x, bool) {
  require_4d(x, "Conv2d");
  if (x.dim(1) != in_) {
    throw ShapeError("Conv2d expects " + std::to_string(in_) + " input channels, got " + shape_string(x.shape()));
  }
  const int N = x.dim(0), H = x.dim(2), W = x.dim(3);
  const int Ho = out_extent(H), Wo = out_extent(W);
  if (Ho <= 0 || Wo <= 0) throw ShapeError("Conv2d input too small: " + shape_string(x.shape()));
  input_ = x;
  Tensor y({N, out_, Ho, Wo});
  const int rows = in_ * kernel_ * kernel_;
  const int spatial = Ho * Wo;
  CMapF w(weight_.data(), out_, rows);
  std::vector<float> col;
  if (!pointwise()) col.resize(static_cast<std::size_t>(rows) * spatial);
  for (int n = 0; n < N; ++n) {
    const float* img = x.data() + static_cast<std::size_t>(n) * in_ * H * W;
    const float* src = img;
    if (!pointwise()) {
      im2col(img, in_, H, W, kernel_, stride_, pad_, Ho, Wo, col.data());
      src = col.data();
    }
    MapF out(y.data() + static_cast<std::size_t>(n) * out_ * spatial, out_, spatial);
    out.noalias() = w * CMapF(src, rows, spatial);
    if (has_bias_) out.colwise() += Eigen::Map<const Eigen::VectorXf>(bias_.data(), out_);
  }
  return y;
}

Tensor Conv2d::backward(const Tensor& gy) {
  const int N = input_.dim(0), H = input_.dim(2), W = input_.dim(3);
  const int Ho = gy.dim(2), Wo = gy.dim(3);
  const int rows = in_ * kernel_ * kernel_;
  const int spatial = Ho * Wo;
  CMapF w(weight_.data(), out_, rows);
  MapF gw(grad_weight_.data(), out_, rows);
  Tensor gx(input_.shape());
  std::vector<float> col, gcol;
  if (!pointwise()) {
    col.resize(static_cast<std::size_t>(rows) * spatial);
    gcol.resize(col.size());
  }
  for (int n = 0; n < N; ++n) {
    const float* img = input_.data() + static_cast<std::size_t>(n) * in_ * H * W;
    CMapF g(gy.data() + static_cast<std::size_t>(n) * out_ * spatial, out_, spatial);
    float* gimg = gx.data() + static_cast<std::size_t>(n) * in_ * H * W;
    if (pointwise()) {
      gw.noalias() += g * CMapF(img, rows, spatial).transpose();
      MapF(gimg, rows, spatial).noalias() = w.transpose() * g;
    } else {
      im2col(img, in_, H, W, kernel_, stride_, pad_, Ho, Wo, col.data());
      gw.noalias() += g * CMapF(col.data(), rows, spatial).transpose();
      MapF(gcol.data(), rows, spatial).noalias() = w.transpose() * g;
      col2im(gcol.data(), in_, H, W, kernel_, stride_, pad_, Ho, Wo, gimg);
    }
    if (has_bias_) {
      for (int c = 0; c < out_; ++c) grad_bias_[c] += g.row(c).sum();
    }
  }
  return gx;
}

void Conv2d::collect(const std::string& prefix, StateRefs& refs) {
  refs.params.push_back({join_name(prefix, "weight"), &weight_, &grad_weight_});
  if (has_bias_) refs.params.push_back({join_name(prefix, "bias"), &bias_, &grad_bias_});
}

// ------------------------------------------------------------- BatchNorm

BatchNorm::BatchNorm(int channels, float momentum, float eps)
    : channels_(channels),
      momentum_(momentum),
      eps_(eps),
      gamma_({channels}, 1.0f),
      beta_({channels}),
      grad_gamma_({channels}),
      grad_beta_({channels}),
      running_mean_({channels}),
      running_var_({channels}, 1.0f) {}

void BatchNorm::init(std::mt19937_64&) {
  gamma_.fill(1.0f);
  beta_.fill(0.0f);
  running_mean_.fill(0.0f);
  running_var_.fill(1.0f);
}

Tensor BatchNorm::forward(const Tensor& x, bool train) {
  if (x.ndim() < 2 || x.dim(1) != channels_) {
    throw ShapeError("BatchNorm expects " + std::to_string(channels_) + " channels, got " + shape_string(x.shape()));
  }
  const int N = x.dim(0);
  const std::size_t S = x.size() / (static_cast<std::size_t>(N) * channels_);
  const std::size_t M = static_cast<std::size_t>(N) * S;
  Tensor y(x.shape());
  xhat_ = Tensor(x.shape());
  inv_std_.assign(channels_, 0.0f);
  cached_train_ = train;
  for (int c = 0; c < channels_; ++c) {
    double mean, var;
    if (train) {
      double sum = 0.0;
      for (int n = 0; n < N; ++n) {
        const float* p = x.data() + (static_cast<std::size_t>(n) * channels_ + c) * S;
        for (std::size_t i = 0; i < S; ++i) sum += p[i];
      }
      mean = sum / M;
      double sq = 0.0;
      for (int n = 0; n < N; ++n) {
        const float* p = x.data() + (static_cast<std::size_t>(n) * channels_ + c) * S;
        for (std::size_t i = 0; i < S; ++i) sq += (p[i] - mean) * (p[i] - mean);
      }
      var = sq / M;
      const double unbiased = M > 1 ? sq / (M - 1) : var;
      running_mean_[c] = static_cast<float>((1.0 - momentum_) * running_mean_[c] + momentum_ * mean);
      running_var_[c] = static_cast<float>((1.0 - momentum_) * running_var_[c] + momentum_ * unbiased);
    } else {
      mean = running_mean_[c];
      var = running_var_[c];
    }
    const float inv = static_cast<float>(1.0 / std::sqrt(var + eps_));
    inv_std_[c] = inv;
    const float m = static_cast<float>(mean);
    for (int n = 0; n < N; ++n) {
      const std::size_t off = (static_cast<std::size_t>(n) * channels_ + c) * S;
      for (std::size_t i = 0; i < S; ++i) {
        const float h = (x[off + i] - m) * inv;
        xhat_[off + i] = h;
        y[off + i] = gamma_[c] * h + beta_[c];
      }
    }
  }
  return y;
}

Tensor BatchNorm::backward(const Tensor& gy) {
  const int N = gy.dim(0);
  const std::size_t S = gy.size() / (static_cast<std::size_t>(N) * channels_);
  const double M = static_cast<double>(N) * S;
  Tensor gx(gy.shape());
  for (int c = 0; c < channels_; ++c) {
    double sum_g = 0.0, sum_gx = 0.0;
    for (int n = 0; n < N; ++n) {
      const std::size_t off = (static_cast<std::size_t>(n) * channels_ + c) * S;
      for (std::size_t i = 0; i < S; ++i) {
        sum_g += gy[off + i];
        sum_gx += static_cast<double>(gy[off + i]) * xhat_[off + i];
      }
    }
    grad_beta_[c] += static_cast<float>(sum_g);
    grad_gamma_[c] += static_cast<float>(sum_gx);
    const double scale = gamma_[c] * inv_std_[c];
    for (int n = 0; n < N; ++n) {
      const std::size_t off = (static_cast<std::size_t>(n) * channels_ + c) * S;
      for (std::size_t i = 0; i < S; ++i) {
        if (cached_train_) {
          gx[off + i] = static_cast<float>(scale * (gy[off + i] - sum_g / M - xhat_[off + i] * sum_gx / M));
        } else {
          gx[off + i] = static_cast<float>(scale * gy[off + i]);
        }
      }
    }
  }
  return gx;
}

void BatchNorm::collect(const std::string& prefix, StateRefs& refs) {
  refs.params.push_back({join_name(prefix, "weight"), &gamma_, &grad_gamma_});
  refs.params.push_back({join_name(prefix, "bias"), &beta_, &grad_beta_});
  refs.buffers.push_back({join_name(prefix, "running_mean"), &running_mean_});
  refs.buffers.push_back({join_name(prefix, "running_var"), &running_var_});
}

// ------------------------------------------------------------------ ReLU

Tensor ReLU::forward(const Tensor& x, bool) {
  output_ = x;
  for (auto& v : output_.values()) v = v > 0.0f ? v : 0.0f;
  return output_;
}

Tensor ReLU::backward(const Tensor& gy) {
  Tensor gx(gy.shape());
  for (std::size_t i = 0; i < gy.size(); ++i) gx[i] = output_[i] > 0.0f ? gy[i] : 0.0f;
  return gx;
}

// ------------------------------------------------------------- MaxPool2d

Tensor MaxPool2d::forward(const Tensor& x, bool) {
  require_4d(x, "MaxPool2d");
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int Ho = out_extent(H), Wo = out_extent(W);
  in_shape_ = x.shape();
  Tensor y({N, C, Ho, Wo});
  argmax_.assign(y.size(), 0);
  std::size_t o = 0;
  for (int n = 0; n < N; ++n) {
    for (int c = 0; c < C; ++c) {
      const std::size_t base = (static_cast<std::size_t>(n) * C + c) * H * W;
      for (int oy = 0; oy < Ho; ++oy) {
        for (int ox = 0; ox < Wo; ++ox, ++o) {
          float best = -std::numeric_limits<float>::infinity();
          std::size_t arg = base;
          for (int ky = 0; ky < kernel_; ++ky) {
            const int iy = oy * stride_ - pad_ + ky;
            if (iy < 0 || iy >= H) continue;
            for (int kx = 0; kx < kernel_; ++kx) {
              const int ix = ox * stride_ - pad_ + kx;
              if (ix < 0 || ix >= W) continue;
              const std::size_t idx = base + static_cast<std::size_t>(iy) * W + ix;
              if (x[idx] > best) {
                best = x[idx];
                arg = idx;
              }
            }
          }
          y[o] = best;
          argmax_[o] = arg;
        }
      }
    }
  }
  return y;
}

Tensor MaxPool2d::backward(const Tensor& gy) {
  Tensor gx(in_shape_);
  for (std::size_t o = 0; o < gy.size(); ++o) gx[argmax_[o]] += gy[o];
  return gx;
}

// ---------------------------------------------------------------- Linear

Linear::Linear(int in_features, int out_features, bool bias)
    : in_(in_features),
      out_(out_features),
      has_bias_(bias),
      weight_({out_features, in_features}),
      grad_weight_({out_features, in_features}) {
  if (has_bias_) {
    bias_ = Tensor({out_features});
    grad_bias_ = Tensor({out_features});
  }
}

void Linear::init(std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& w : weight_.values()) w = static_cast<float>(dist(rng));
  if (has_bias_) bias_.fill(0.0f);
}

Tensor Linear::forward(const Tensor& x, bool) {
  if (x.ndim() != 2 || x.dim(1) != in_) {
    throw ShapeError("Linear expects N x " + std::to_string(in_) + ", got " + shape_string(x.shape()));
  }
  input_ = x;
  Tensor y({x.dim(0), out_});
  y.matrix().noalias() = x.matrix() * weight_.matrix().transpose();
  if (has_bias_) y.matrix().rowwise() += Eigen::Map<const Eigen::RowVectorXf>(bias_.data(), out_);
  return y;
}

Tensor Linear::backward(const Tensor& gy) {
  grad_weight_.matrix().noalias() += gy.matrix().transpose() * input_.matrix();
  if (has_bias_) {
    Eigen::Map<Eigen::RowVectorXf>(grad_bias_.data(), out_) += gy.matrix().colwise().sum();
  }
  Tensor gx(input_.shape());
  gx.matrix().noalias() = gy.matrix() * weight_.matrix();
  return gx;
}

void Linear::collect(const std::string& prefix, StateRefs& refs) {
  refs.params.push_back({join_name(prefix, "weight"), &weight_, &grad_weight_});
  if (has_bias_) refs.params.push_back({join_name(prefix, "bias"), &bias_, &grad_bias_});
}

// ------------------------------------------------------------ Sequential

Sequential& Sequential::add(std::string name, std::unique_ptr<Module> m) {
  children_.emplace_back(std::move(name), std::move(m));
  return *this;
}

Tensor Sequential::forward(const Tensor& x, bool train) {
  Tensor h = x;
  for (auto& [name, m] : children_) h = m->forward(h, train);
  return h;
}

Tensor Sequential::backward(const Tensor& grad_out) {
  Tensor g = grad_out;
  for (auto it = children_.rbegin(); it != children_.rend(); ++it) g = it->second->backward(g);
  return g;
}

void Sequential::collect(const std::string& prefix, StateRefs& refs) {
  for (auto& [name, m] : children_) m->collect(join_name(prefix, name), refs);
}

void Sequential::init(std::mt19937_64& rng) {
  for (auto& [name, m] : children_) m->init(rng);
}

// ------------------------------------------------------------------ GAP

Tensor global_avg_pool(const Tensor& x) {
  require_4d(x, "global_avg_pool");
  const int N = x.dim(0), C = x.dim(1);
  const std::size_t S = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  Tensor y({N, C});
  for (int n = 0; n < N; ++n) {
    for (int c = 0; c < C; ++c) {
      const float* p = x.data() + (static_cast<std::size_t>(n) * C + c) * S;
      double sum = 0.0;
      for (std::size_t i = 0; i < S; ++i) sum += p[i];
      y[static_cast<std::size_t>(n) * C + c] = static_cast<float>(sum / static_cast<double>(S));
    }
  }
  return y;
}

Tensor global_avg_pool_backward(const Tensor& grad_out, const std::vector<int>& in_shape) {
  Tensor gx(in_shape);
  const int N = in_shape[0], C = in_shape[1];
  const std::size_t S = static_cast<std::size_t>(in_shape[2]) * in_shape[3];
  const float inv = 1.0f / static_cast<float>(S);
  for (int n = 0; n < N; ++n) {
    for (int c = 0; c < C; ++c) {
      const float g = grad_out[static_cast<std::size_t>(n) * C + c] * inv;
      float* p = gx.data() + (static_cast<std::size_t>(n) * C + c) * S;
      std::fill(p, p + S, g);
    }
  }
  return gx;
}

}  // namespace greyreid::nn
