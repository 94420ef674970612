#ifndef DEMANDMAP_CNN_TENSOR_HPP_
#define DEMANDMAP_CNN_TENSOR_HPP_

#include <Eigen/Core>
#include <numeric>
#include <vector>

#include "demandmap/common.hpp"

namespace demandmap::cnn {

using MatrixRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<MatrixRM>;
using ConstMatMap = Eigen::Map<const MatrixRM>;

// Dense row-major tensor of doubles. Activations use (N, C, H, W).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<long> shape) : shape_(std::move(shape)) {
    data_.assign(static_cast<size_t>(count(shape_)), 0.0);
  }

  static long count(const std::vector<long>& shape) {
    long n = 1;
    for (long d : shape) n *= d;
    return n;
  }

  const std::vector<long>& shape() const { return shape_; }
  long dim(size_t i) const { return shape_.at(i); }
  long size() const { return static_cast<long>(data_.size()); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& operator[](long i) { return data_[static_cast<size_t>(i)]; }
  double operator[](long i) const { return data_[static_cast<size_t>(i)]; }

  void zero() { std::fill(data_.begin(), data_.end(), 0.0); }
  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const {
    for (double v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  MatMap as_matrix(long rows, long cols) {
    if (rows * cols != size()) throw ArgumentError("tensor reshape size mismatch");
    return MatMap(data(), rows, cols);
  }
  ConstMatMap as_matrix(long rows, long cols) const {
    if (rows * cols != size()) throw ArgumentError("tensor reshape size mismatch");
    return ConstMatMap(data(), rows, cols);
  }

 private:
  std::vector<long> shape_;
  std::vector<double> data_;
};

inline std::string shape_str(const std::vector<long>& shape) {
  std::string s = "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += strf("%ld", shape[i]);
  }
  return s + "]";
}

}  // namespace demandmap::cnn

#endif  // DEMANDMAP_CNN_TENSOR_HPP_
