#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace tlnet {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major fp64 array of rank 0..4. Values only: graph participation
// (requires_grad, node id) lives on Var, see graph.hpp.
class Tensor {
 public:
  static constexpr std::size_t kMaxRank = 4;

  Tensor() = default;
  // Zero-filled.
  explicit Tensor(Shape shape);
  // Throws DimensionError if data.size() != product(shape) and NumericError if
  // any value is NaN or infinite.
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value) { return full({}, value); }
  static Tensor identity(std::size_t n);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  const std::vector<double>& vec() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  const double& operator[](std::size_t i) const { return data_[i]; }

  double& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  const double& at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  double& at(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  const double& at(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  // Value of a rank-0 or single-element tensor.
  double item() const;

  Tensor reshaped(Shape shape) const;
  bool all_finite() const;
  bool bitwise_equal(const Tensor& other) const;

  Tensor& operator+=(const Tensor& other);
  Tensor& operator*=(double factor);

 private:
  Shape shape_;
  std::vector<double> data_;
};

double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace tlnet
