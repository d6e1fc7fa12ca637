#include "mdiff/numerics/dense_array.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "mdiff/errors.hpp"

namespace mdiff::num {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

DenseArray::DenseArray(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

DenseArray::DenseArray(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_size(shape_) != data_.size()) {
    throw DimensionError("array of shape " + shape_string(shape_) + " cannot hold " +
                         std::to_string(data_.size()) + " values");
  }
}

DenseArray DenseArray::scalar(double value) { return DenseArray(Shape{}, std::vector<double>{value}); }

DenseArray DenseArray::matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values) {
  return DenseArray(Shape{rows, cols}, std::vector<double>(values));
}

std::size_t DenseArray::extent(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_string(shape_));
  }
  return shape_[axis];
}

DenseArray DenseArray::reshaped(Shape shape) const {
  if (shape_size(shape) != data_.size()) {
    throw DimensionError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  return DenseArray(std::move(shape), data_);
}

bool DenseArray::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double DenseArray::item() const {
  if (data_.size() != 1) {
    throw DimensionError("item() on array of shape " + shape_string(shape_));
  }
  return data_[0];
}

namespace {

void require_same_shape(const DenseArray& a, const DenseArray& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shapes " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()) + " differ");
  }
}

}  // namespace

DenseArray operator+(const DenseArray& a, const DenseArray& b) {
  require_same_shape(a, b, "add");
  DenseArray out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

DenseArray operator-(const DenseArray& a, const DenseArray& b) {
  require_same_shape(a, b, "sub");
  DenseArray out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
  return out;
}

DenseArray operator*(double s, const DenseArray& a) {
  DenseArray out = a;
  for (double& v : out.values()) v *= s;
  return out;
}

double max_abs_diff(const DenseArray& a, const DenseArray& b) {
  require_same_shape(a, b, "max_abs_diff");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

double frobenius_norm(const DenseArray& a) {
  double sum = 0.0;
  for (double v : a.values()) sum += v * v;
  return std::sqrt(sum);
}

DenseArray concat_rows(const DenseArray& top, const DenseArray& bottom) {
  if (top.rank() != 2 || bottom.rank() != 2 || top.cols() != bottom.cols()) {
    throw DimensionError("concat_rows: " + shape_string(top.shape()) + " and " +
                         shape_string(bottom.shape()) + " are not row-compatible matrices");
  }
  std::vector<double> data(top.values().begin(), top.values().end());
  data.insert(data.end(), bottom.values().begin(), bottom.values().end());
  return DenseArray(Shape{top.rows() + bottom.rows(), top.cols()}, std::move(data));
}

DenseArray slice_rows(const DenseArray& a, std::size_t begin, std::size_t count) {
  if (a.rank() != 2 || begin + count > a.rows()) {
    throw DimensionError("slice_rows: rows [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") out of range for " + shape_string(a.shape()));
  }
  const auto first = a.values().begin() + static_cast<std::ptrdiff_t>(begin * a.cols());
  return DenseArray(Shape{count, a.cols()},
                    std::vector<double>(first, first + static_cast<std::ptrdiff_t>(count * a.cols())));
}

}  // namespace mdiff::num
