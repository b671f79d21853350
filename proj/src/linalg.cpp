#include "linalg.hpp"

#include <unsupported/Eigen/KroneckerProduct>

#include <cmath>
#include <numeric>

#include "error.hpp"

namespace dobs {

namespace {

void require_finite(const Matrix& m, const char* who) {
  if (!all_finite(m)) {
    throw InvalidInputError(std::string(who) + ": matrix has non-finite entries");
  }
}

void require_square(const Matrix& m, const char* who) {
  if (m.rows() != m.cols()) {
    throw InvalidInputError(std::string(who) + ": matrix must be square");
  }
}

// Eigendecomposition of the symmetric part, after rejecting matrices whose
// asymmetry exceeds tol relative to their magnitude.
Eigen::SelfAdjointEigenSolver<Matrix> symmetric_eigs(const Matrix& m, double tol,
                                                     const char* who) {
  require_square(m, who);
  require_finite(m, who);
  const double scale = m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
  const double asym = m.size() == 0 ? 0.0 : (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > tol * std::max(1.0, scale)) {
    throw InvalidInputError(std::string(who) + ": matrix is not symmetric within tolerance");
  }
  Matrix sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
  if (es.info() != Eigen::Success) {
    throw NumericalError(std::string(who) + ": symmetric eigendecomposition failed");
  }
  return es;
}

}  // namespace

int BlockPartition::total_rows() const {
  return std::accumulate(row_sizes.begin(), row_sizes.end(), 0);
}

int BlockPartition::total_cols() const {
  return std::accumulate(col_sizes.begin(), col_sizes.end(), 0);
}

BlockPartition BlockPartition::square(std::vector<int> sizes) {
  BlockPartition p;
  p.row_sizes = sizes;
  p.col_sizes = std::move(sizes);
  return p;
}

bool all_finite(const Matrix& m) {
  return m.allFinite();
}

Matrix kernel_basis(const Matrix& m, double tol) {
  require_finite(m, "kernel_basis");
  if (tol <= 0.0) throw InvalidInputError("kernel_basis: tol must be positive");
  if (m.cols() == 0) return Matrix(0, 0);
  if (m.rows() == 0) return Matrix::Identity(m.cols(), m.cols());

  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double smax = sv.size() > 0 ? sv(0) : 0.0;
  Eigen::Index rank = 0;
  if (smax > 0.0) {
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
      if (sv(i) > tol * smax) ++rank;
    }
  }
  return svd.matrixV().rightCols(m.cols() - rank);
}

Matrix orthonormal_row_complement(const Matrix& v, double tol) {
  require_finite(v, "orthonormal_row_complement");
  const Eigen::Index n = v.rows();
  const Eigen::Index k = v.cols();
  if (k > n) {
    throw InvalidInputError("orthonormal_row_complement: more columns than rows");
  }
  if (k == 0) return Matrix::Identity(n, n);

  Matrix gram = v.transpose() * v;
  const double dev = (gram - Matrix::Identity(k, k)).cwiseAbs().maxCoeff();
  if (dev > tol) {
    throw InvalidInputError("orthonormal_row_complement: columns are not orthonormal");
  }
  if (k == n) return Matrix(0, n);

  // The singular values of v are all 1, so the trailing n-k left singular
  // vectors span the orthogonal complement of the column space exactly.
  Eigen::JacobiSVD<Matrix> svd(v, Eigen::ComputeFullU);
  return svd.matrixU().rightCols(n - k).transpose();
}

double max_abs(const Matrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

double induced_two_norm(const Matrix& m) {
  require_finite(m, "induced_two_norm");
  if (m.rows() == 0 || m.cols() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

double weighted_two_norm(const Matrix& m, const Matrix& r) {
  require_square(m, "weighted_two_norm");
  if (r.rows() != m.rows() || r.cols() != m.cols()) {
    throw InvalidInputError("weighted_two_norm: weight must match the matrix dimension");
  }
  if (m.rows() == 0) return 0.0;
  require_finite(m, "weighted_two_norm");

  auto es = symmetric_eigs(r, 1e-10, "weighted_two_norm");
  const Vector eigs = es.eigenvalues();
  const double emax = eigs.maxCoeff();
  if (eigs.minCoeff() <= 1e-12 * std::max(1.0, emax)) {
    throw InvalidInputError("weighted_two_norm: weight matrix is not positive definite");
  }
  Vector half = eigs.cwiseSqrt();
  Matrix rs = es.eigenvectors() * half.asDiagonal() * es.eigenvectors().transpose();
  Matrix ris = es.eigenvectors() * half.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
  return induced_two_norm(rs * m * ris);
}

double mixed_matrix_norm(const Matrix& m, const BlockPartition& part) {
  for (int s : part.row_sizes) {
    if (s < 0) throw InvalidInputError("mixed_matrix_norm: negative block size");
  }
  for (int s : part.col_sizes) {
    if (s < 0) throw InvalidInputError("mixed_matrix_norm: negative block size");
  }
  if (part.total_rows() != m.rows() || part.total_cols() != m.cols()) {
    throw InvalidInputError("mixed_matrix_norm: partition does not tile the matrix");
  }
  require_finite(m, "mixed_matrix_norm");

  const size_t br = part.row_sizes.size();
  const size_t bc = part.col_sizes.size();
  double worst = 0.0;
  int r0 = 0;
  for (size_t i = 0; i < br; ++i) {
    double row_sum = 0.0;
    int c0 = 0;
    for (size_t j = 0; j < bc; ++j) {
      row_sum += induced_two_norm(m.block(r0, c0, part.row_sizes[i], part.col_sizes[j]));
      c0 += part.col_sizes[j];
    }
    worst = std::max(worst, row_sum);
    r0 += part.row_sizes[i];
  }
  return worst;
}

Matrix kron(const Matrix& a, const Matrix& b) {
  require_finite(a, "kron");
  require_finite(b, "kron");
  return Eigen::kroneckerProduct(a, b);
}

double spectral_radius(const Matrix& m) {
  require_square(m, "spectral_radius");
  require_finite(m, "spectral_radius");
  if (m.rows() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> es(m, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) {
    throw NumericalError("spectral_radius: eigensolver did not converge");
  }
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

bool is_positive_semidefinite(const Matrix& m, double tol) {
  if (tol < 0.0) throw InvalidInputError("is_positive_semidefinite: tol must be nonnegative");
  auto es = symmetric_eigs(m, tol, "is_positive_semidefinite");
  if (m.rows() == 0) return true;
  return es.eigenvalues().minCoeff() >= -tol;
}

bool is_positive_definite(const Matrix& m, double tol) {
  auto es = symmetric_eigs(m, 1e-10, "is_positive_definite");
  if (m.rows() == 0) return false;
  const double emax = es.eigenvalues().cwiseAbs().maxCoeff();
  return es.eigenvalues().minCoeff() > tol * std::max(1.0, emax);
}

Matrix symmetric_sqrt(const Matrix& r) {
  auto es = symmetric_eigs(r, 1e-10, "symmetric_sqrt");
  Vector eigs = es.eigenvalues();
  for (Eigen::Index i = 0; i < eigs.size(); ++i) {
    if (eigs(i) < 0.0) {
      if (eigs(i) < -1e-10 * std::max(1.0, eigs.cwiseAbs().maxCoeff())) {
        throw InvalidInputError("symmetric_sqrt: matrix is not positive semidefinite");
      }
      eigs(i) = 0.0;
    }
  }
  return es.eigenvectors() * eigs.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

Matrix matrix_power(const Matrix& m, long p) {
  require_square(m, "matrix_power");
  if (p < 0) throw InvalidInputError("matrix_power: exponent must be nonnegative");
  Matrix result = Matrix::Identity(m.rows(), m.cols());
  Matrix base = m;
  long e = p;
  while (e > 0) {
    if (e & 1) result = result * base;
    base = base * base;
    e >>= 1;
  }
  return result;
}

}  // namespace dobs
