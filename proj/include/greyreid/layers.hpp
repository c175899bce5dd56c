#ifndef GREYREID_LAYERS_HPP_
#define GREYREID_LAYERS_HPP_

#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "greyreid/tensor.hpp"

namespace greyreid::nn {

struct ParamRef {
  std::string name;
  Tensor* value;
  Tensor* grad;
};

struct BufferRef {
  std::string name;
  Tensor* value;
};

/// Canonically named views of a module tree's learnable parameters and
/// persistent buffers (batch-norm running statistics).
struct StateRefs {
  std::vector<ParamRef> params;
  std::vector<BufferRef> buffers;
};

inline std::string join_name(const std::string& prefix, const std::string& name) {
  return prefix.empty() ? name : prefix + "." + name;
}

/// A layer with an explicit backward pass. forward() caches whatever
/// backward() needs; backward() accumulates parameter gradients and returns
/// the gradient with respect to the last forward input.
class Module {
 public:
  virtual ~Module() = default;
  virtual Tensor forward(const Tensor& x, bool train) = 0;
  virtual Tensor backward(const Tensor& grad_out) = 0;
  virtual void collect(const std::string& prefix, StateRefs& refs) { (void)prefix, (void)refs; }
  virtual void init(std::mt19937_64& rng) { (void)rng; }
};

class Conv2d : public Module {
 public:
  Conv2d(int in_channels, int out_channels, int kernel, int stride, int pad, bool bias = false);

  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& grad_out) override;
  void collect(const std::string& prefix, StateRefs& refs) override;
  void init(std::mt19937_64& rng) override;

  int out_extent(int in) const { return (in + 2 * pad_ - kernel_) / stride_ + 1; }
  int in_channels() const { return in_; }
  int out_channels() const { return out_; }
  Tensor& weight() { return weight_; }
  Tensor& bias() { return bias_; }

 private:
  bool pointwise() const { return kernel_ == 1 && stride_ == 1 && pad_ == 0; }

  int in_, out_, kernel_, stride_, pad_;
  bool has_bias_;
  Tensor weight_, grad_weight_;  // out x (in * k * k)
  Tensor bias_, grad_bias_;
  Tensor input_;
};

/// Batch normalization over every axis but the channel axis (1). Works for
/// N x C x H x W maps and N x C matrices.
class BatchNorm : public Module {
 public:
  explicit BatchNorm(int channels, float momentum = 0.1f, float eps = 1e-5f);

  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& grad_out) override;
  void collect(const std::string& prefix, StateRefs& refs) override;
  void init(std::mt19937_64& rng) override;

 private:
  int channels_;
  float momentum_, eps_;
  Tensor gamma_, beta_, grad_gamma_, grad_beta_;
  Tensor running_mean_, running_var_;
  // Cached for backward.
  Tensor xhat_;
  std::vector<float> inv_std_;
  bool cached_train_ = false;
};

class ReLU : public Module {
 public:
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& grad_out) override;

 private:
  Tensor output_;
};

class MaxPool2d : public Module {
 public:
  MaxPool2d(int kernel, int stride, int pad) : kernel_(kernel), stride_(stride), pad_(pad) {}
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& grad_out) override;
  int out_extent(int in) const { return (in + 2 * pad_ - kernel_) / stride_ + 1; }

 private:
  int kernel_, stride_, pad_;
  std::vector<int> in_shape_;
  std::vector<std::size_t> argmax_;
};

/// y = x W^T + b for x of shape N x in.
class Linear : public Module {
 public:
  Linear(int in_features, int out_features, bool bias = true);

  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& grad_out) override;
  void collect(const std::string& prefix, StateRefs& refs) override;
  void init(std::mt19937_64& rng) override;

  int in_features() const { return in_; }
  int out_features() const { return out_; }
  Tensor& weight() { return weight_; }

 private:
  int in_, out_;
  bool has_bias_;
  Tensor weight_, grad_weight_, bias_, grad_bias_;
  Tensor input_;
};

/// Named children run in order.
class Sequential : public Module {
 public:
  Sequential& add(std::string name, std::unique_ptr<Module> m);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& grad_out) override;
  void collect(const std::string& prefix, StateRefs& refs) override;
  void init(std::mt19937_64& rng) override;
  bool empty() const { return children_.empty(); }

 private:
  std::vector<std::pair<std::string, std::unique_ptr<Module>>> children_;
};

// Per-channel spatial mean: N x C x H x W -> N x C.
Tensor global_avg_pool(const Tensor& x);
// Gradient of global_avg_pool back to N x C x H x W.
Tensor global_avg_pool_backward(const Tensor& grad_out, const std::vector<int>& in_shape);

}  // namespace greyreid::nn

#endif  // GREYREID_LAYERS_HPP_
