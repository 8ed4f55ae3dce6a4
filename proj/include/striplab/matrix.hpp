#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace striplab {

using Vec = std::vector<double>;

struct SingularMatrixError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dense row-major square-ish matrix. Strip widths are tiny (m <= 8 in
// practice), so everything below is plain O(m^3) code with no blocking.
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), d_(static_cast<std::size_t>(rows) * cols, fill) {}

  static Matrix identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  bool empty() const { return d_.empty(); }

  double& operator()(int i, int j) { return d_[static_cast<std::size_t>(i) * cols_ + j]; }
  double operator()(int i, int j) const { return d_[static_cast<std::size_t>(i) * cols_ + j]; }

  std::span<const double> row(int i) const {
    return {d_.data() + static_cast<std::size_t>(i) * cols_, static_cast<std::size_t>(cols_)};
  }
  const double* data() const { return d_.data(); }
  double* data() { return d_.data(); }

  // Operator infinity norm: max absolute row sum. This is the norm used
  // everywhere a matrix norm appears in this project.
  double inf_norm() const {
    double best = 0.0;
    for (int i = 0; i < rows_; ++i) {
      double s = 0.0;
      for (int j = 0; j < cols_; ++j) s += std::fabs((*this)(i, j));
      best = std::max(best, s);
    }
    return best;
  }

  double max_abs_diff(const Matrix& o) const {
    double best = 0.0;
    for (std::size_t k = 0; k < d_.size(); ++k) best = std::max(best, std::fabs(d_[k] - o.d_[k]));
    return best;
  }

  double min_entry() const {
    double best = d_.empty() ? 0.0 : d_[0];
    for (double v : d_) best = std::min(best, v);
    return best;
  }

  Matrix& operator+=(const Matrix& o) {
    for (std::size_t k = 0; k < d_.size(); ++k) d_[k] += o.d_[k];
    return *this;
  }
  Matrix& operator-=(const Matrix& o) {
    for (std::size_t k = 0; k < d_.size(); ++k) d_[k] -= o.d_[k];
    return *this;
  }
  Matrix& operator*=(double c) {
    for (double& v : d_) v *= c;
    return *this;
  }

  friend Matrix operator*(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows_, b.cols_);
    for (int i = 0; i < a.rows_; ++i)
      for (int k = 0; k < a.cols_; ++k) {
        const double aik = a(i, k);
        if (aik == 0.0) continue;
        for (int j = 0; j < b.cols_; ++j) out(i, j) += aik * b(k, j);
      }
    return out;
  }
  friend Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
  friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }

 private:
  int rows_ = 0, cols_ = 0;
  Vec d_;
};

// column action: (M v)_i
inline Vec mat_vec(const Matrix& m, std::span<const double> v) {
  Vec out(m.rows(), 0.0);
  for (int i = 0; i < m.rows(); ++i) {
    double s = 0.0;
    for (int j = 0; j < m.cols(); ++j) s += m(i, j) * v[j];
    out[i] = s;
  }
  return out;
}

// row action: (v^T M)_j
inline Vec vec_mat(std::span<const double> v, const Matrix& m) {
  Vec out(m.cols(), 0.0);
  for (int i = 0; i < m.rows(); ++i) {
    const double vi = v[i];
    if (vi == 0.0) continue;
    for (int j = 0; j < m.cols(); ++j) out[j] += vi * m(i, j);
  }
  return out;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double vec_sum(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

inline double vec_max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double best = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) best = std::max(best, std::fabs(a[i] - b[i]));
  return best;
}

// Solves A X = B by Gaussian elimination with partial pivoting; A is
// consumed. Throws SingularMatrixError when a pivot collapses, which a
// caller on the zeta path should surface as a C2* ellipticity failure.
inline Matrix solve(Matrix a, Matrix b) {
  const int n = a.rows();
  if (a.cols() != n || b.rows() != n) throw std::invalid_argument("solve: dimension mismatch");
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r)
      if (std::fabs(a(r, col)) > std::fabs(a(piv, col))) piv = r;
    if (std::fabs(a(piv, col)) < 1e-300) throw SingularMatrixError("solve: singular matrix");
    if (piv != col) {
      for (int j = 0; j < n; ++j) std::swap(a(col, j), a(piv, j));
      for (int j = 0; j < b.cols(); ++j) std::swap(b(col, j), b(piv, j));
    }
    const double inv = 1.0 / a(col, col);
    for (int r = col + 1; r < n; ++r) {
      const double f = a(r, col) * inv;
      if (f == 0.0) continue;
      for (int j = col; j < n; ++j) a(r, j) -= f * a(col, j);
      for (int j = 0; j < b.cols(); ++j) b(r, j) -= f * b(col, j);
    }
  }
  Matrix x(n, b.cols());
  for (int col = n - 1; col >= 0; --col) {
    for (int j = 0; j < b.cols(); ++j) {
      double s = b(col, j);
      for (int k = col + 1; k < n; ++k) s -= a(col, k) * x(k, j);
      x(col, j) = s / a(col, col);
    }
  }
  return x;
}

}  // namespace striplab
