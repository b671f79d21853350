#pragma once

#include <Eigen/Dense>
#include <vector>

namespace dobs {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Relative singular-value cutoff used for every numerical rank decision.
inline constexpr double kDefaultRankTol = 1e-10;

// Row/column block sizes of a partitioned matrix. Zero-sized blocks are
// allowed: an agent whose unobservable subspace is trivial contributes an
// empty block that drops out of the blockwise norms.
struct BlockPartition {
  std::vector<int> row_sizes;
  std::vector<int> col_sizes;

  int total_rows() const;
  int total_cols() const;
  static BlockPartition square(std::vector<int> sizes);
};

bool all_finite(const Matrix& m);

// Orthonormal basis of ker M as columns. Rank is decided by singular values
// relative to tol * sigma_max; full column rank yields zero columns.
Matrix kernel_basis(const Matrix& m, double tol = kDefaultRankTol);

// Given V with orthonormal columns, returns Q with orthonormal rows such
// that Q V = 0 and [V | Q^T] is square orthogonal.
Matrix orthonormal_row_complement(const Matrix& v, double tol = 1e-8);

double induced_two_norm(const Matrix& m);

// Largest absolute entry; 0 for an empty matrix.
double max_abs(const Matrix& m);

// Norm induced by x -> sqrt(x^T R x) for symmetric positive definite R:
// the largest singular value of R^(1/2) M R^(-1/2).
double weighted_two_norm(const Matrix& m, const Matrix& r);

// Infinity norm of the block-abstraction matrix whose (i, j) entry is the
// two-norm of block (i, j) of M under the given partition.
double mixed_matrix_norm(const Matrix& m, const BlockPartition& part);

Matrix kron(const Matrix& a, const Matrix& b);

// Largest eigenvalue magnitude; 0 for an empty matrix.
double spectral_radius(const Matrix& m);

// M must be symmetric within tol; true iff min eigenvalue >= -tol.
bool is_positive_semidefinite(const Matrix& m, double tol = 1e-9);

// True iff symmetric with min eigenvalue > tol * max(1, |eigs|).
bool is_positive_definite(const Matrix& m, double tol = 1e-12);

// Symmetric square root of a symmetric positive semidefinite matrix.
Matrix symmetric_sqrt(const Matrix& r);

// M^p for integer p >= 0 by repeated squaring.
Matrix matrix_power(const Matrix& m, long p);

}  // namespace dobs
