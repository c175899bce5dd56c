#include "greyreid/tensor.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <sstream>

#include "greyreid/errors.hpp"

namespace greyreid {

namespace {

std::size_t element_count(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw ShapeError("negative tensor dimension in " + shape_string(shape));
    n *= static_cast<std::size_t>(d);
  }
  return shape.empty() ? 0 : n;
}

}  // namespace

Tensor::Tensor(std::vector<int> shape, float fill)
    : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

void Tensor::fill(float v) { std::fill(data_.begin(), data_.end(), v); }

void Tensor::reshape(std::vector<int> shape) {
  if (element_count(shape) != data_.size()) {
    throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  shape_ = std::move(shape);
}

Eigen::Map<RowMatrixF> Tensor::matrix() {
  if (shape_.size() != 2) throw ShapeError("matrix view needs a 2-D tensor, got " + shape_string(shape_));
  return {data_.data(), shape_[0], shape_[1]};
}

Eigen::Map<const RowMatrixF> Tensor::matrix() const {
  if (shape_.size() != 2) throw ShapeError("matrix view needs a 2-D tensor, got " + shape_string(shape_));
  return {data_.data(), shape_[0], shape_[1]};
}

Tensor Tensor::from_matrix(const RowMatrixF& m) {
  Tensor t({static_cast<int>(m.rows()), static_cast<int>(m.cols())});
  t.matrix() = m;
  return t;
}

std::string shape_string(const std::vector<int>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor slice_batch(const Tensor& t, int begin, int end) {
  if (t.ndim() == 0 || begin < 0 || end > t.dim(0) || begin > end) {
    throw ShapeError("bad batch slice");
  }
  std::vector<int> shape = t.shape();
  shape[0] = end - begin;
  Tensor out(shape);
  const std::size_t stride = t.size() / static_cast<std::size_t>(t.dim(0));
  std::copy(t.data() + begin * stride, t.data() + end * stride, out.data());
  return out;
}

}  // namespace greyreid
