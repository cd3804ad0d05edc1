#include "vcq/linalg.hpp"

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace vcq {

bool is_row_stochastic(const Matrix& m, double tol) {
  if (m.rows() != m.cols() || m.rows() == 0) return false;
  if ((m.array() < 0.0).any()) return false;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    if (std::abs(m.row(i).sum() - 1.0) > tol) return false;
  }
  return true;
}

Matrix matrix_power(const Matrix& m, long n) {
  if (m.rows() != m.cols()) throw std::invalid_argument("matrix_power: matrix must be square");
  if (n < 0) throw std::invalid_argument("matrix_power: exponent must be nonnegative");
  Matrix result = Matrix::Identity(m.rows(), m.cols());
  Matrix base = m;
  while (n > 0) {
    if (n & 1) result = result * base;
    n >>= 1;
    if (n > 0) base = base * base;
  }
  return result;
}

RowVector stationary_left_vector(const Matrix& m) {
  const Eigen::Index k = m.rows();
  if (k == 0 || m.cols() != k) throw std::invalid_argument("stationary_left_vector: matrix must be square");

  // Stack (m' - I) with an all-ones row; the unique probability vector in
  // the left null space is the least-squares solution of A p = e_{k+1}.
  Matrix a(k + 1, k);
  a.topRows(k) = m.transpose() - Matrix::Identity(k, k);
  a.bottomRows(1).setOnes();
  Vector b = Vector::Zero(k + 1);
  b(k) = 1.0;

  Vector p = a.colPivHouseholderQr().solve(b);
  double residual = (a * p - b).cwiseAbs().maxCoeff();
  if (!p.allFinite() || residual > 1e-8) {
    throw std::runtime_error("stationary_left_vector: no unique stationary distribution");
  }

  // Clamp round-off negatives and renormalize.
  p = p.cwiseMax(0.0);
  p /= p.sum();
  return p.transpose();
}

double spectral_radius(const Matrix& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("spectral_radius: matrix must be square");
  if (m.rows() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> solver(m, /*computeEigenvectors=*/false);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

bool is_primitive(const Matrix& m) {
  const Eigen::Index k = m.rows();
  if (k == 0 || m.cols() != k) return false;
  if (k > 64) throw std::invalid_argument("is_primitive: supports at most 64 states");

  // Adjacency rows as bitmasks; boolean matrix product per step.
  std::vector<uint64_t> adj(k, 0);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      if (m(i, j) > 0.0) adj[i] |= (uint64_t{1} << j);
    }
  }
  const uint64_t full = (k == 64) ? ~uint64_t{0} : (uint64_t{1} << k) - 1;
  auto all_positive = [&](const std::vector<uint64_t>& rows) {
    for (uint64_t r : rows) {
      if (r != full) return false;
    }
    return true;
  };

  const long wielandt = (k - 1) * (k - 1) + 1;
  std::vector<uint64_t> power = adj;
  for (long step = 1; step <= wielandt; ++step) {
    if (all_positive(power)) return true;
    if (step == wielandt) break;
    std::vector<uint64_t> next(k, 0);
    for (Eigen::Index i = 0; i < k; ++i) {
      for (Eigen::Index j = 0; j < k; ++j) {
        if (power[i] & (uint64_t{1} << j)) next[i] |= adj[j];
      }
    }
    power = std::move(next);
  }
  return false;
}

}  // namespace vcq
