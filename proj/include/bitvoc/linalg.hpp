#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace bitvoc {

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// out = W x + bias
inline void affine(const Matrix& W, std::span<const double> bias, std::span<const double> x, std::span<double> out) {
  if (x.size() != W.cols() || bias.size() != W.rows() || out.size() != W.rows())
    throw std::invalid_argument("affine: dimension mismatch");
  const std::size_t n = W.cols();
  for (std::size_t r = 0; r < W.rows(); ++r) {
    const double* w = W.row(r).data();
    double acc = 0.0;
    for (std::size_t c = 0; c < n; ++c) acc += w[c] * x[c];
    out[r] = acc + bias[r];
  }
}

inline std::vector<double> affine(const Matrix& W, std::span<const double> bias, std::span<const double> x) {
  std::vector<double> out(W.rows());
  affine(W, bias, x, out);
  return out;
}

}  // namespace bitvoc
