#pragma once

#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <vector>

namespace vti {

/// Dense 2-D array of doubles, row-major. Scalars are 1x1, row vectors 1xN.
class Tensor {
 public:
  Tensor() = default;
  Tensor(long rows, long cols) : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows * cols), 0.0) {
    if (rows < 0 || cols < 0) throw std::invalid_argument("Tensor: negative extent");
  }
  static Tensor full(long rows, long cols, double v) {
    Tensor t(rows, cols);
    std::fill(t.data_.begin(), t.data_.end(), v);
    return t;
  }
  static Tensor scalar(double v) { return full(1, 1, v); }
  static Tensor row(std::initializer_list<double> xs) {
    Tensor t(1, static_cast<long>(xs.size()));
    long j = 0;
    for (double x : xs) t.data_[j++] = x;
    return t;
  }
  static Tensor row(const std::vector<double>& xs) {
    Tensor t(1, static_cast<long>(xs.size()));
    t.data_ = xs;
    return t;
  }
  static Tensor col(const std::vector<double>& xs) {
    Tensor t(static_cast<long>(xs.size()), 1);
    t.data_ = xs;
    return t;
  }

  long rows() const { return rows_; }
  long cols() const { return cols_; }
  long size() const { return rows_ * cols_; }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& operator()(long r, long c) { return data_[static_cast<size_t>(r * cols_ + c)]; }
  double operator()(long r, long c) const { return data_[static_cast<size_t>(r * cols_ + c)]; }
  double& operator[](long i) { return data_[static_cast<size_t>(i)]; }
  double operator[](long i) const { return data_[static_cast<size_t>(i)]; }

  bool same_shape(const Tensor& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
  bool all_finite() const;
  double l2_norm() const;
  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  /// Reinterprets the buffer with new extents; element count must match.
  Tensor reshaped(long rows, long cols) const {
    if (rows * cols != size()) throw std::invalid_argument("Tensor: reshape size mismatch");
    Tensor t = *this;
    t.rows_ = rows;
    t.cols_ = cols;
    return t;
  }

  const std::vector<double>& vec() const { return data_; }
  std::vector<double>& vec() { return data_; }

 private:
  long rows_ = 0, cols_ = 0;
  std::vector<double> data_;
};

}  // namespace vti
