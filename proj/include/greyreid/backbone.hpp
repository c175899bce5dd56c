#ifndef GREYREID_BACKBONE_HPP_
#define GREYREID_BACKBONE_HPP_

#include <memory>
#include <string>

#include "greyreid/layers.hpp"

namespace greyreid {

enum class BackboneKind { kStandard50, kToyCnn };

std::string backbone_name(BackboneKind kind);
BackboneKind parse_backbone(const std::string& name);

/// Convolutional trunk mapping N x 3 x H x W images to N x C x H/s x W/s
/// feature maps, s = 16 with the last-stage stride removed, 32 otherwise.
class Backbone : public nn::Module {
 public:
  virtual int out_channels() const = 0;
  int total_stride() const { return final_stride_one_ ? 16 : 32; }
  // Throws ShapeError when H or W is not a multiple of total_stride().
  void check_input(const Tensor& x) const;

 protected:
  explicit Backbone(bool final_stride_one) : final_stride_one_(final_stride_one) {}
  bool final_stride_one_;
};

/// 50-layer bottleneck residual network (3-4-6-3 blocks, 2048 output
/// channels). Parameter names follow the common torchvision layout so
/// converted weights can be loaded by name.
class ResNet50 : public Backbone {
 public:
  explicit ResNet50(bool final_stride_one);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& grad_out) override;
  void collect(const std::string& prefix, nn::StateRefs& refs) override;
  void init(std::mt19937_64& rng) override;
  int out_channels() const override { return 2048; }

 private:
  nn::Sequential body_;
};

/// Small five-stage conv/BN/ReLU trunk with the same stride contract as
/// ResNet50 and `channels` output channels.
class ToyCnn : public Backbone {
 public:
  ToyCnn(int channels, bool final_stride_one);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& grad_out) override;
  void collect(const std::string& prefix, nn::StateRefs& refs) override;
  void init(std::mt19937_64& rng) override;
  int out_channels() const override { return channels_; }

 private:
  int channels_;
  nn::Sequential body_;
};

std::unique_ptr<Backbone> make_backbone(BackboneKind kind, bool final_stride_one, int toy_channels);

}  // namespace greyreid

#endif  // GREYREID_BACKBONE_HPP_
