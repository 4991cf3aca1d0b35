#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace uwcsr {

using cplx = std::complex<double>;

// Dense subcarrier x symbol grid, row-major (one row per subcarrier).
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<T>& values() { return data_; }
  const std::vector<T>& values() const { return data_; }

  bool same_shape(const Grid& other) const { return rows_ == other.rows_ && cols_ == other.cols_; }

  friend bool operator==(const Grid& a, const Grid& b) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

// Complex frequency-time channel response H[s, m].
using CsiMatrix = Grid<cplx>;
using ComplexGrid = Grid<cplx>;
using MaskGrid = Grid<unsigned char>;

// Real channels x rows x cols tensor, contiguous channel-major.
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(std::size_t channels, std::size_t rows, std::size_t cols, double fill = 0.0)
      : channels_(channels), rows_(rows), cols_(cols), data_(channels * rows * cols, fill) {}

  std::size_t channels() const { return channels_; }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  std::size_t plane_size() const { return rows_ * cols_; }

  double& operator()(std::size_t c, std::size_t r, std::size_t k) {
    return data_[(c * rows_ + r) * cols_ + k];
  }
  double operator()(std::size_t c, std::size_t r, std::size_t k) const {
    return data_[(c * rows_ + r) * cols_ + k];
  }

  std::span<double> plane(std::size_t c) { return {data_.data() + c * plane_size(), plane_size()}; }
  std::span<const double> plane(std::size_t c) const {
    return {data_.data() + c * plane_size(), plane_size()};
  }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  bool same_shape(const Tensor3& o) const {
    return channels_ == o.channels_ && rows_ == o.rows_ && cols_ == o.cols_;
  }

  friend bool operator==(const Tensor3& a, const Tensor3& b) = default;

 private:
  std::size_t channels_ = 0;
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Two-channel real image of a CsiMatrix: plane 0 = Re(H), plane 1 = Im(H).
using TwoChannelCsi = Tensor3;

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline void require_same_shape(const Tensor3& a, const Tensor3& b, const char* what) {
  if (!a.same_shape(b)) throw DimensionMismatch(std::string(what) + ": tensor shape mismatch");
}

template <typename T, typename U>
void require_same_shape(const Grid<T>& a, const Grid<U>& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionMismatch(std::string(what) + ": grid shape mismatch");
}

}  // namespace uwcsr
