#ifndef GREYREID_TENSOR_HPP_
#define GREYREID_TENSOR_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace greyreid {

using RowMatrixF =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMatrixD =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense row-major float tensor. Feature maps use NCHW, matrices use N x D.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape, float fill = 0.0f);

  const std::vector<int>& shape() const { return shape_; }
  int dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t ndim() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }
  std::span<float> values() { return data_; }
  std::span<const float> values() const { return data_; }

  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  // NCHW accessors.
  float& at(int n, int c, int h, int w) {
    return data_[((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }
  const float& at(int n, int c, int h, int w) const {
    return data_[((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }

  void fill(float v);
  void reshape(std::vector<int> shape);
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  // Views a 2-D tensor as an Eigen matrix.
  Eigen::Map<RowMatrixF> matrix();
  Eigen::Map<const RowMatrixF> matrix() const;

  static Tensor from_matrix(const RowMatrixF& m);

 private:
  std::vector<int> shape_;
  std::vector<float, Eigen::aligned_allocator<float>> data_;
};

std::string shape_string(const std::vector<int>& shape);

// Slices samples [begin, end) along the leading axis.
Tensor slice_batch(const Tensor& t, int begin, int end);

}  // namespace greyreid

#endif  // GREYREID_TENSOR_HPP_
