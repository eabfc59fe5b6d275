#include "tlnet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <numeric>
#include <sstream>

#include "tlnet/error.hpp"

namespace tlnet {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ')';
  return os.str();
}

namespace {

void check_rank(const Shape& shape) {
  if (shape.size() > Tensor::kMaxRank) {
    throw DimensionError("tensor rank " + std::to_string(shape.size()) + " exceeds 4");
  }
}

}  // namespace

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  check_rank(shape_);
  data_.assign(shape_size(shape_), 0.0);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_rank(shape_);
  if (shape_size(shape_) != data_.size()) {
    throw DimensionError("shape " + shape_str(shape_) + " needs " +
                         std::to_string(shape_size(shape_)) + " values, got " +
                         std::to_string(data_.size()));
  }
  if (!all_finite()) throw NumericError("non-finite value in tensor data");
}

Tensor Tensor::full(Shape shape, double value) {
  Tensor t(std::move(shape));
  std::fill(t.data_.begin(), t.data_.end(), value);
  return t;
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t({n, n});
  for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " +
                         shape_str(shape_));
  }
  return shape_[axis];
}

double Tensor::item() const {
  if (data_.size() != 1) {
    throw DimensionError("item() on tensor of shape " + shape_str(shape_));
  }
  return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != data_.size()) {
    throw DimensionError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
  }
  Tensor t;
  check_rank(shape);
  t.shape_ = std::move(shape);
  t.data_ = data_;
  return t;
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

bool Tensor::bitwise_equal(const Tensor& other) const {
  return shape_ == other.shape_ &&
         (data_.empty() ||
          std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(double)) == 0);
}

Tensor& Tensor::operator+=(const Tensor& other) {
  if (other.shape_ != shape_) {
    throw DimensionError("+= shape mismatch " + shape_str(shape_) + " vs " +
                         shape_str(other.shape_));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Tensor& Tensor::operator*=(double factor) {
  for (double& v : data_) v *= factor;
  return *this;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size()) {
    throw DimensionError("max_abs_diff size mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace tlnet
