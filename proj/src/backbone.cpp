#include "greyreid/backbone.hpp"

#include "greyreid/errors.hpp"

namespace greyreid {

namespace {

using nn::BatchNorm;
using nn::Conv2d;
using nn::MaxPool2d;
using nn::ReLU;
using nn::Sequential;

class Bottleneck : public nn::Module {
 public:
  Bottleneck(int in, int planes, int stride)
      : conv1_(in, planes, 1, 1, 0),
        bn1_(planes),
        conv2_(planes, planes, 3, stride, 1),
        bn2_(planes),
        conv3_(planes, planes * 4, 1, 1, 0),
        bn3_(planes * 4) {
    if (stride != 1 || in != planes * 4) {
      downsample_.add("0", std::make_unique<Conv2d>(in, planes * 4, 1, stride, 0));
      downsample_.add("1", std::make_unique<BatchNorm>(planes * 4));
    }
  }

  Tensor forward(const Tensor& x, bool train) override {
    Tensor h = relu1_.forward(bn1_.forward(conv1_.forward(x, train), train), train);
    h = relu2_.forward(bn2_.forward(conv2_.forward(h, train), train), train);
    h = bn3_.forward(conv3_.forward(h, train), train);
    const Tensor identity = downsample_.empty() ? x : downsample_.forward(x, train);
    for (std::size_t i = 0; i < h.size(); ++i) h[i] += identity[i];
    return relu_out_.forward(h, train);
  }

  Tensor backward(const Tensor& grad_out) override {
    const Tensor g = relu_out_.backward(grad_out);
    Tensor gx = conv1_.backward(bn1_.backward(relu1_.backward(
        conv2_.backward(bn2_.backward(relu2_.backward(conv3_.backward(bn3_.backward(g))))))));
    const Tensor gid = downsample_.empty() ? g : downsample_.backward(g);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gid[i];
    return gx;
  }

  void collect(const std::string& prefix, nn::StateRefs& refs) override {
    conv1_.collect(nn::join_name(prefix, "conv1"), refs);
    bn1_.collect(nn::join_name(prefix, "bn1"), refs);
    conv2_.collect(nn::join_name(prefix, "conv2"), refs);
    bn2_.collect(nn::join_name(prefix, "bn2"), refs);
    conv3_.collect(nn::join_name(prefix, "conv3"), refs);
    bn3_.collect(nn::join_name(prefix, "bn3"), refs);
    downsample_.collect(nn::join_name(prefix, "downsample"), refs);
  }

  void init(std::mt19937_64& rng) override {
    conv1_.init(rng);
    bn1_.init(rng);
    conv2_.init(rng);
    bn2_.init(rng);
    conv3_.init(rng);
    bn3_.init(rng);
    downsample_.init(rng);
  }

 private:
  Conv2d conv1_;
  BatchNorm bn1_;
  ReLU relu1_;
  Conv2d conv2_;
  BatchNorm bn2_;
  ReLU relu2_;
  Conv2d conv3_;
  BatchNorm bn3_;
  Sequential downsample_;
  ReLU relu_out_;
};

std::unique_ptr<Sequential> make_layer(int& in, int planes, int blocks, int stride) {
  auto layer = std::make_unique<Sequential>();
  for (int b = 0; b < blocks; ++b) {
    layer->add(std::to_string(b), std::make_unique<Bottleneck>(in, planes, b == 0 ? stride : 1));
    in = planes * 4;
  }
  return layer;
}

std::unique_ptr<Sequential> conv_bn_relu(int in, int out, int stride) {
  auto s = std::make_unique<Sequential>();
  s->add("conv", std::make_unique<Conv2d>(in, out, 3, stride, 1));
  s->add("bn", std::make_unique<BatchNorm>(out));
  s->add("relu", std::make_unique<ReLU>());
  return s;
}

}  // namespace

std::string backbone_name(BackboneKind kind) {
  return kind == BackboneKind::kStandard50 ? "standard-50" : "toy-cnn";
}

BackboneKind parse_backbone(const std::string& name) {
  if (name == "standard-50") return BackboneKind::kStandard50;
  if (name == "toy-cnn") return BackboneKind::kToyCnn;
  throw ConfigError("unknown backbone '" + name + "' (expected standard-50 or toy-cnn)");
}

void Backbone::check_input(const Tensor& x) const {
  if (x.ndim() != 4 || x.dim(1) != 3) {
    throw ShapeError("backbone expects N x 3 x H x W input, got " + shape_string(x.shape()));
  }
  const int s = total_stride();
  if (x.dim(2) % s != 0 || x.dim(3) % s != 0) {
    throw ShapeError("input spatial size " + std::to_string(x.dim(2)) + "x" + std::to_string(x.dim(3)) +
                     " is not a multiple of the backbone stride " + std::to_string(s));
  }
}

ResNet50::ResNet50(bool final_stride_one) : Backbone(final_stride_one) {
  body_.add("conv1", std::make_unique<Conv2d>(3, 64, 7, 2, 3));
  body_.add("bn1", std::make_unique<BatchNorm>(64));
  body_.add("relu", std::make_unique<ReLU>());
  body_.add("maxpool", std::make_unique<MaxPool2d>(3, 2, 1));
  int in = 64;
  body_.add("layer1", make_layer(in, 64, 3, 1));
  body_.add("layer2", make_layer(in, 128, 4, 2));
  body_.add("layer3", make_layer(in, 256, 6, 2));
  body_.add("layer4", make_layer(in, 512, 3, final_stride_one ? 1 : 2));
}

Tensor ResNet50::forward(const Tensor& x, bool train) {
  check_input(x);
  return body_.forward(x, train);
}
Tensor ResNet50::backward(const Tensor& grad_out) { return body_.backward(grad_out); }
void ResNet50::collect(const std::string& prefix, nn::StateRefs& refs) { body_.collect(prefix, refs); }
void ResNet50::init(std::mt19937_64& rng) { body_.init(rng); }

ToyCnn::ToyCnn(int channels, bool final_stride_one) : Backbone(final_stride_one), channels_(channels) {
  if (channels < 8 || channels % 8 != 0) throw ConfigError("toy-cnn channels must be a positive multiple of 8");
  body_.add("stem", conv_bn_relu(3, channels / 8, 2));
  body_.add("stage1", conv_bn_relu(channels / 8, channels / 4, 2));
  body_.add("stage2", conv_bn_relu(channels / 4, channels / 2, 2));
  body_.add("stage3", conv_bn_relu(channels / 2, channels, 2));
  body_.add("stage4", conv_bn_relu(channels, channels, final_stride_one ? 1 : 2));
}

Tensor ToyCnn::forward(const Tensor& x, bool train) {
  check_input(x);
  return body_.forward(x, train);
}
Tensor ToyCnn::backward(const Tensor& grad_out) { return body_.backward(grad_out); }
void ToyCnn::collect(const std::string& prefix, nn::StateRefs& refs) { body_.collect(prefix, refs); }
void ToyCnn::init(std::mt19937_64& rng) { body_.init(rng); }

std::unique_ptr<Backbone> make_backbone(BackboneKind kind, bool final_stride_one, int toy_channels) {
  if (kind == BackboneKind::kStandard50) return std::make_unique<ResNet50>(final_stride_one);
  return std::make_unique<ToyCnn>(toy_channels, final_stride_one);
}

}  // namespace greyreid
