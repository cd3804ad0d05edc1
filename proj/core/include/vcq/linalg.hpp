#pragma once

#include <Eigen/Dense>

namespace vcq {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

/// True when every entry is nonnegative and every row sums to 1 within tol.
bool is_row_stochastic(const Matrix& m, double tol = 1e-12);

/// m^n by repeated squaring; n = 0 yields the identity.
Matrix matrix_power(const Matrix& m, long n);

/// Left Perron vector of a stochastic matrix, normalized to sum 1.
/// Solved as the linear system (m' - I)p = 0 stacked with a normalization
/// row. Throws std::runtime_error when no unique solution exists.
RowVector stationary_left_vector(const Matrix& m);

double spectral_radius(const Matrix& m);

/// Primitivity (irreducible + aperiodic) of the support pattern, decided
/// by checking whether some boolean power up to the Wielandt bound
/// (k-1)^2 + 1 is strictly positive.
bool is_primitive(const Matrix& m);

}  // namespace vcq
