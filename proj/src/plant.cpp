#include "plant.hpp"

#include <string>

#include "error.hpp"

namespace dobs {

void Plant::validate() const {
  if (A.rows() == 0 || A.rows() != A.cols()) {
    throw InvalidInputError("plant: A must be square and nonempty");
  }
  if (!all_finite(A)) throw InvalidInputError("plant: A has non-finite entries");
  if (C.size() < 2) {
    throw InvalidInputError("plant: at least two agents are required");
  }
  for (size_t i = 0; i < C.size(); ++i) {
    const Matrix& ci = C[i];
    if (ci.rows() < 1 || ci.cols() != A.rows()) {
      throw InvalidInputError("plant: C_" + std::to_string(i + 1) +
                              " must have at least one row and n columns");
    }
    if (!all_finite(ci)) {
      throw InvalidInputError("plant: C_" + std::to_string(i + 1) + " has non-finite entries");
    }
  }
}

Matrix observability_matrix(const Matrix& c, const Matrix& a) {
  if (a.rows() != a.cols()) throw InvalidInputError("observability_matrix: A must be square");
  if (c.cols() != a.rows()) throw InvalidInputError("observability_matrix: C must have n columns");
  const Eigen::Index n = a.rows();
  const Eigen::Index s = c.rows();
  Matrix obs(s * n, n);
  Matrix block = c;
  for (Eigen::Index k = 0; k < n; ++k) {
    obs.middleRows(k * s, s) = block;
    if (k + 1 < n) block = block * a;
  }
  return obs;
}

bool observable_pair(const Matrix& c, const Matrix& a, double tol) {
  if (a.rows() == 0) return true;  // zero-dimensional pair, vacuously observable
  return kernel_basis(observability_matrix(c, a), tol).cols() == 0;
}

Matrix unobservable_space(const Matrix& c, const Matrix& a, double tol) {
  return kernel_basis(observability_matrix(c, a), tol);
}

ObsDecomposition decompose(const Plant& plant, int agent, double tol) {
  plant.validate();
  if (agent < 1 || agent > plant.m()) {
    throw InvalidInputError("decompose: agent index out of range");
  }
  const Matrix& a = plant.A;
  const Matrix& c = plant.C[agent - 1];
  const Eigen::Index n = a.rows();

  ObsDecomposition d;
  d.agent = agent;
  d.V = unobservable_space(c, a, tol);
  d.unobs_dim = static_cast<int>(d.V.cols());
  d.Q = orthonormal_row_complement(d.V);
  d.P = d.V * d.V.transpose();

  // Quotient maps from least squares against the orthonormal rows of Q:
  // Q A = A_quot Q and C = C_quot Q have exact solutions A_quot = Q A Q^T,
  // C_quot = C Q^T because ker Q is A-invariant and inside ker C.
  d.A_quot = d.Q * a * d.Q.transpose();
  d.C_quot = c * d.Q.transpose();

  const double scale = std::max(1.0, induced_two_norm(a));
  const double res_a = induced_two_norm(d.Q * a - d.A_quot * d.Q);
  const double res_c =
      induced_two_norm(c - d.C_quot * d.Q) / std::max(1.0, induced_two_norm(c));
  if (res_a > 1e-8 * scale || res_c > 1e-8) {
    throw InternalError("decompose: quotient solve residual exceeds 1e-8 for agent " +
                        std::to_string(agent));
  }
  if (n - d.unobs_dim > 0 && !observable_pair(d.C_quot, d.A_quot, tol)) {
    throw InternalError("decompose: quotient pair is not observable for agent " +
                        std::to_string(agent));
  }
  return d;
}

std::vector<ObsDecomposition> decompose_all(const Plant& plant, double tol) {
  std::vector<ObsDecomposition> out;
  out.reserve(plant.C.size());
  for (int i = 1; i <= plant.m(); ++i) out.push_back(decompose(plant, i, tol));
  return out;
}

bool joint_observability(const Plant& plant, double tol) {
  plant.validate();
  const Eigen::Index n = plant.A.rows();
  Eigen::Index rows = 0;
  for (const Matrix& ci : plant.C) rows += ci.rows();
  Matrix stacked(rows, n);
  Eigen::Index r = 0;
  for (const Matrix& ci : plant.C) {
    stacked.middleRows(r, ci.rows()) = ci;
    r += ci.rows();
  }
  const bool by_rank = observable_pair(stacked, plant.A, tol);

  // Independent route: joint observability iff the per-agent unobservable
  // subspaces intersect trivially, i.e. the stacked complements Q_i have a
  // trivial common kernel.
  Eigen::Index qrows = 0;
  std::vector<Matrix> qs;
  qs.reserve(plant.C.size());
  for (int i = 1; i <= plant.m(); ++i) {
    qs.push_back(decompose(plant, i, tol).Q);
    qrows += qs.back().rows();
  }
  Matrix qstack(qrows, n);
  r = 0;
  for (const Matrix& q : qs) {
    qstack.middleRows(r, q.rows()) = q;
    r += q.rows();
  }
  const bool by_intersection = kernel_basis(qstack, tol).cols() == 0;

  if (by_rank != by_intersection) {
    throw InternalError(
        "joint_observability: stacked-rank and subspace-intersection routes disagree");
  }
  return by_rank;
}

Matrix restriction_matrix(const Matrix& m, const Matrix& v, double tol) {
  if (m.rows() != m.cols()) throw InvalidInputError("restriction_matrix: M must be square");
  if (v.rows() != m.rows()) throw InvalidInputError("restriction_matrix: V must have n rows");
  if (v.cols() == 0) return Matrix(0, 0);
  const double dev =
      (v.transpose() * v - Matrix::Identity(v.cols(), v.cols())).cwiseAbs().maxCoeff();
  if (dev > 1e-8) {
    throw InvalidInputError("restriction_matrix: V columns are not orthonormal");
  }
  Matrix x = v.transpose() * (m * v);
  const double res = induced_two_norm(m * v - v * x);
  if (res > tol * std::max(1e-300, induced_two_norm(m))) {
    throw InvalidInputError("restriction_matrix: not invariant, residual " +
                            std::to_string(res) + " exceeds tolerance");
  }
  return x;
}

}  // namespace dobs
