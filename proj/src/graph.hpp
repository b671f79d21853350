#pragma once

#include <cstdint>
#include <vector>

#include "linalg.hpp"

namespace dobs {

// Directed communication graph on m agents, 0-based vertices. An arc
// (from, to) means "to" receives from "from", so the in-neighbors of a
// vertex are the agents it listens to. Text formats use 1-based labels.
class Digraph {
 public:
  Digraph() = default;
  explicit Digraph(int m);
  static Digraph with_self_loops(int m);
  // All arcs present, self-loops included; handy as a trivially valid schedule.
  static Digraph complete(int m);

  int size() const { return m_; }
  bool has_arc(int from, int to) const;
  void add_arc(int from, int to);
  void add_self_loops();
  bool has_all_self_loops() const;
  int in_degree(int v) const;
  std::vector<int> in_neighbors(int v) const;  // ascending
  std::vector<std::vector<int>> neighbor_sets() const;
  std::vector<std::pair<int, int>> arcs() const;

  bool operator==(const Digraph&) const = default;

 private:
  void check_vertex(int v) const;

  int m_ = 0;
  std::vector<uint8_t> adj_;  // adj_[from * m_ + to]
};

bool is_strongly_connected(const Digraph& g);

// Row-stochastic averaging matrix of a self-looped graph: row i carries
// weight 1/|N_i| on every in-neighbor of i. The graph of S^T is the
// communication graph itself.
Matrix flocking_matrix(const Digraph& g);

// Positive stochastic left fixed vector: S^T pi = pi, sum pi = 1. Solved by
// an eigendecomposition with a power-iteration fallback.
Vector perron_vector(const Matrix& s, double tol = 1e-12);

struct LaplacianCertificate {
  Vector pi;
  Matrix laplacian;          // diag(pi) - S^T diag(pi) S
  double min_eigenvalue;     // PSD demands >= -tol
  double second_eigenvalue;  // one-dimensional kernel demands > tol
  double ones_residual;      // max norm of L * ones
  bool psd = false;
  bool ones_in_kernel = false;
  bool kernel_dim_one = false;

  bool ok() const { return psd && ones_in_kernel && kernel_dim_one; }
};

// Checked statement of the stochastic-Laplacian lemma for the flocking
// matrix of a strongly connected self-looped graph. Reports the three flags
// without throwing; callers decide how a failure is surfaced.
LaplacianCertificate laplacian_certificate(const Matrix& s, double tol = 1e-9);

enum class SignalMode { Sequence, Periodic, Random };

// Time-varying communication schedule over event indices tau >= 0. The
// distinct graphs are declared up front so the synthesis step can certify
// all of them; the signal then picks one per event.
class GraphSchedule {
 public:
  GraphSchedule(std::vector<Digraph> graphs, SignalMode mode, std::vector<int> sequence,
                int default_index, uint64_t seed);

  static GraphSchedule constant(Digraph g);
  static GraphSchedule sequence(std::vector<Digraph> graphs, std::vector<int> seq,
                                int default_index);
  static GraphSchedule periodic(std::vector<Digraph> graphs, std::vector<int> pattern);
  static GraphSchedule round_robin(std::vector<Digraph> graphs);
  static GraphSchedule random(std::vector<Digraph> graphs, uint64_t seed);

  int graph_count() const { return static_cast<int>(graphs_.size()); }
  const Digraph& graph(int id) const;
  int agent_count() const { return graphs_.empty() ? 0 : graphs_[0].size(); }

  int index_at(long tau) const;
  const Digraph& at(long tau) const { return graph(index_at(tau)); }
  Matrix flocking_at(long tau) const { return flocking_matrix(at(tau)); }

  SignalMode mode() const { return mode_; }
  const std::vector<int>& signal_sequence() const { return sequence_; }
  int default_index() const { return default_index_; }
  uint64_t seed() const { return seed_; }

 private:
  std::vector<Digraph> graphs_;
  SignalMode mode_ = SignalMode::Sequence;
  std::vector<int> sequence_;
  int default_index_ = 0;
  uint64_t seed_ = 0;
};

}  // namespace dobs
