#pragma once

#include <cstddef>
#include <limits>
#include <vector>

#include "spectr/error.hpp"

namespace spectr::lp {

enum class Status { optimal, unbounded, iteration_limit };

struct Solution {
  Status status = Status::optimal;
  double objective = 0.0;
  std::vector<double> x;
  std::size_t pivots = 0;
};

/// Dense row-major matrix, just enough for building tableaus.
class Matrix {
 public:
  Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double* row(std::size_t r) { return data_.data() + r * cols_; }

 private:
  std::size_t rows_, cols_;
  std::vector<double> data_;
};

/// Maximizes c'x subject to Ax <= b, x >= 0, with b >= 0 so the slack basis
/// is feasible from the start.
///
/// Primal simplex on a dense tableau using Bland's rule (lowest-index entering
/// column, lowest-index leaving basic variable among ratio ties), which rules
/// out cycling on the heavily degenerate transport instances solved here.
class DenseSimplex {
 public:
  DenseSimplex(const Matrix& a, const std::vector<double>& b, const std::vector<double>& c,
               double pivot_tolerance = 1e-10)
      : m_(a.rows()), n_(a.cols()), tol_(pivot_tolerance), t_(a.rows() + 1, a.cols() + a.rows() + 1),
        basis_(a.rows()) {
    if (b.size() != m_ || c.size() != n_) {
      throw Error(ErrorKind::dimension, "LP dimensions do not agree");
    }
    const std::size_t rhs = n_ + m_;
    for (std::size_t i = 0; i < m_; ++i) {
      if (b[i] < 0.0) throw Error(ErrorKind::domain, "dense simplex requires b >= 0");
      for (std::size_t j = 0; j < n_; ++j) t_(i, j) = a(i, j);
      t_(i, n_ + i) = 1.0;
      t_(i, rhs) = b[i];
      basis_[i] = n_ + i;
    }
    for (std::size_t j = 0; j < n_; ++j) t_(m_, j) = -c[j];
  }

  Solution solve(std::size_t max_pivots = 1'000'000) {
    Solution sol;
    const std::size_t width = n_ + m_;
    while (true) {
      std::size_t enter = width;
      for (std::size_t j = 0; j < width; ++j) {
        if (t_(m_, j) < -tol_) {
          enter = j;
          break;
        }
      }
      if (enter == width) break;

      std::size_t leave = m_;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < m_; ++i) {
        const double coef = t_(i, enter);
        if (coef <= tol_) continue;
        const double ratio = t_(i, width) / coef;
        if (leave == m_ || ratio < best - 1e-14 ||
            (ratio <= best + 1e-14 && basis_[i] < basis_[leave])) {
          if (ratio < best) best = ratio;
          leave = i;
        }
      }
      if (leave == m_) {
        sol.status = Status::unbounded;
        return sol;
      }
      pivot(leave, enter);
      if (++sol.pivots >= max_pivots) {
        sol.status = Status::iteration_limit;
        return sol;
      }
    }
    sol.x.assign(n_, 0.0);
    for (std::size_t i = 0; i < m_; ++i) {
      if (basis_[i] < n_) sol.x[basis_[i]] = std::max(0.0, t_(i, width));
    }
    sol.objective = t_(m_, width);
    return sol;
  }

 private:
  void pivot(std::size_t r, std::size_t s) {
    const std::size_t cols = t_.cols();
    double* pr = t_.row(r);
    const double inv = 1.0 / pr[s];
    for (std::size_t j = 0; j < cols; ++j) pr[j] *= inv;
    pr[s] = 1.0;
    for (std::size_t i = 0; i <= m_; ++i) {
      if (i == r) continue;
      double* pi = t_.row(i);
      const double f = pi[s];
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < cols; ++j) pi[j] -= f * pr[j];
      pi[s] = 0.0;
    }
    basis_[r] = s;
  }

  std::size_t m_, n_;
  double tol_;
  Matrix t_;
  std::vector<std::size_t> basis_;
};

}  // namespace spectr::lp
