#ifndef KSRL_MAT_HPP
#define KSRL_MAT_HPP

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace ksrl {

using Vec = std::vector<double>;

// Dense row-major matrix. Small and dumb on purpose: the hot kernels in this
// project are explicit loops over contiguous rows/columns.
struct Mat {
  int rows = 0;
  int cols = 0;
  Vec data;

  Mat() = default;
  Mat(int r, int c, double fill = 0.0)
      : rows(r), cols(c), data(static_cast<size_t>(r) * c, fill) {}

  double& operator()(int i, int j) { return data[static_cast<size_t>(i) * cols + j]; }
  double operator()(int i, int j) const { return data[static_cast<size_t>(i) * cols + j]; }

  double* row(int i) { return data.data() + static_cast<size_t>(i) * cols; }
  const double* row(int i) const { return data.data() + static_cast<size_t>(i) * cols; }

  std::span<double> row_span(int i) { return {row(i), static_cast<size_t>(cols)}; }
  std::span<const double> row_span(int i) const { return {row(i), static_cast<size_t>(cols)}; }

  Vec col(int j) const {
    Vec out(rows);
    for (int i = 0; i < rows; ++i) out[i] = (*this)(i, j);
    return out;
  }

  bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2sq(std::span<const double> a) { return dot(a, a); }

inline double l2norm(std::span<const double> a) { return std::sqrt(norm2sq(a)); }

// out = A * x
inline void matvec(const Mat& A, std::span<const double> x, std::span<double> out) {
  if (static_cast<int>(x.size()) != A.cols || static_cast<int>(out.size()) != A.rows)
    throw std::invalid_argument("matvec: dimension mismatch");
  for (int i = 0; i < A.rows; ++i) out[i] = dot(A.row_span(i), x);
}

inline bool all_finite(std::span<const double> a) {
  for (double v : a)
    if (!std::isfinite(v)) return false;
  return true;
}

inline double mean(std::span<const double> a) {
  if (a.empty()) return 0.0;
  double s = 0.0;
  for (double v : a) s += v;
  return s / static_cast<double>(a.size());
}

// Sample standard deviation (n-1 denominator); 0 for n < 2.
inline double sample_std(std::span<const double> a) {
  const size_t n = a.size();
  if (n < 2) return 0.0;
  const double m = mean(a);
  double s = 0.0;
  for (double v : a) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(n - 1));
}

}  // namespace ksrl

#endif  // KSRL_MAT_HPP
