#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace mdiff::num {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

// Row-major array of doubles. Rank-0 arrays hold a single scalar.
class DenseArray {
 public:
  DenseArray() = default;
  explicit DenseArray(Shape shape, double fill = 0.0);
  DenseArray(Shape shape, std::vector<double> data);

  static DenseArray scalar(double value);
  // Builds a rows x cols matrix from row-major values.
  static DenseArray matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }
  std::size_t extent(std::size_t axis) const;

  // Last-axis extent, and the number of last-axis rows (product of all other extents).
  std::size_t cols() const noexcept { return shape_.empty() ? 1 : shape_.back(); }
  std::size_t rows() const noexcept { return cols() == 0 ? 0 : data_.size() / cols(); }

  std::span<const double> values() const noexcept { return data_; }
  std::span<double> values() noexcept { return data_; }
  const double* data() const noexcept { return data_.data(); }
  double* data() noexcept { return data_.data(); }

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }

  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }

  std::span<const double> row(std::size_t r) const { return values().subspan(r * cols(), cols()); }
  std::span<double> row(std::size_t r) { return values().subspan(r * cols(), cols()); }

  // Same data, new shape with equal element count.
  DenseArray reshaped(Shape shape) const;

  bool all_finite() const noexcept;
  double item() const;

  bool operator==(const DenseArray& other) const = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

// Elementwise helpers used outside the tape (schedule math, data handling, tests).
DenseArray operator+(const DenseArray& a, const DenseArray& b);
DenseArray operator-(const DenseArray& a, const DenseArray& b);
DenseArray operator*(double s, const DenseArray& a);

double max_abs_diff(const DenseArray& a, const DenseArray& b);
double frobenius_norm(const DenseArray& a);

// Stacks row blocks of equal column count: [r1 x c] ++ [r2 x c] -> [(r1+r2) x c].
DenseArray concat_rows(const DenseArray& top, const DenseArray& bottom);
// Rows [begin, begin + count) of a matrix.
DenseArray slice_rows(const DenseArray& a, std::size_t begin, std::size_t count);

}  // namespace mdiff::num
