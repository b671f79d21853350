#pragma once

#include <vector>

#include "linalg.hpp"

namespace dobs {

// Autonomous discrete-time plant x(t+1) = A x(t) with the output rows split
// across m agents, y_i = C_i x. Joint observability of the stacked pair is a
// synthesis precondition, not a struct invariant; it is checked where needed.
struct Plant {
  Matrix A;               // n x n
  std::vector<Matrix> C;  // one s_i x n block per agent

  int n() const { return static_cast<int>(A.rows()); }
  int m() const { return static_cast<int>(C.size()); }

  void validate() const;
};

// Per-agent split of the state space into the unobservable subspace and its
// orthogonal complement, with the maps induced on the quotient.
struct ObsDecomposition {
  int agent = 0;    // 1-based label
  int unobs_dim = 0;
  Matrix V;         // n x unobs_dim, orthonormal columns spanning the unobservable subspace
  Matrix Q;         // (n - unobs_dim) x n, orthonormal rows, ker Q = range V
  Matrix A_quot;    // quotient plant map: Q A = A_quot Q
  Matrix C_quot;    // quotient output map: C_quot Q = C_i
  Matrix P;         // orthogonal projection V V^T
};

Matrix observability_matrix(const Matrix& c, const Matrix& a);

bool observable_pair(const Matrix& c, const Matrix& a, double tol = kDefaultRankTol);

// Orthonormal basis of the unobservable subspace ker O(C, A).
Matrix unobservable_space(const Matrix& c, const Matrix& a, double tol = kDefaultRankTol);

// agent is the 1-based index into plant.C.
ObsDecomposition decompose(const Plant& plant, int agent, double tol = kDefaultRankTol);

std::vector<ObsDecomposition> decompose_all(const Plant& plant, double tol = kDefaultRankTol);

// True iff the stacked output pair is observable. Computed two ways, by the
// rank of the stacked observability matrix and by intersecting the per-agent
// unobservable subspaces, and cross-checked.
bool joint_observability(const Plant& plant, double tol = kDefaultRankTol);

// Unique X with M V = V X for an M-invariant range V with orthonormal
// columns. Throws when the invariance residual exceeds tol * |M|_2.
Matrix restriction_matrix(const Matrix& m, const Matrix& v, double tol = 1e-9);

}  // namespace dobs
