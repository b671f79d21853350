#include "graph.hpp"

#include <algorithm>
#include <string>

#include "error.hpp"

namespace dobs {

Digraph::Digraph(int m) : m_(m) {
  if (m < 1) throw InvalidInputError("digraph: vertex count must be positive");
  adj_.assign(static_cast<size_t>(m) * m, 0);
}

Digraph Digraph::with_self_loops(int m) {
  Digraph g(m);
  g.add_self_loops();
  return g;
}

Digraph Digraph::complete(int m) {
  Digraph g(m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) g.add_arc(i, j);
  }
  return g;
}

void Digraph::check_vertex(int v) const {
  if (v < 0 || v >= m_) throw InvalidInputError("digraph: vertex out of range");
}

bool Digraph::has_arc(int from, int to) const {
  check_vertex(from);
  check_vertex(to);
  return adj_[static_cast<size_t>(from) * m_ + to] != 0;
}

void Digraph::add_arc(int from, int to) {
  check_vertex(from);
  check_vertex(to);
  adj_[static_cast<size_t>(from) * m_ + to] = 1;
}

void Digraph::add_self_loops() {
  for (int v = 0; v < m_; ++v) adj_[static_cast<size_t>(v) * m_ + v] = 1;
}

bool Digraph::has_all_self_loops() const {
  for (int v = 0; v < m_; ++v) {
    if (!adj_[static_cast<size_t>(v) * m_ + v]) return false;
  }
  return true;
}

int Digraph::in_degree(int v) const {
  check_vertex(v);
  int d = 0;
  for (int u = 0; u < m_; ++u) d += adj_[static_cast<size_t>(u) * m_ + v];
  return d;
}

std::vector<int> Digraph::in_neighbors(int v) const {
  check_vertex(v);
  std::vector<int> out;
  for (int u = 0; u < m_; ++u) {
    if (adj_[static_cast<size_t>(u) * m_ + v]) out.push_back(u);
  }
  return out;
}

std::vector<std::vector<int>> Digraph::neighbor_sets() const {
  std::vector<std::vector<int>> out(m_);
  for (int v = 0; v < m_; ++v) out[v] = in_neighbors(v);
  return out;
}

std::vector<std::pair<int, int>> Digraph::arcs() const {
  std::vector<std::pair<int, int>> out;
  for (int u = 0; u < m_; ++u) {
    for (int v = 0; v < m_; ++v) {
      if (adj_[static_cast<size_t>(u) * m_ + v]) out.emplace_back(u, v);
    }
  }
  return out;
}

namespace {

// Reachability sweep along arcs, optionally reversed.
int reach_count(const Digraph& g, bool reversed) {
  const int m = g.size();
  std::vector<uint8_t> seen(m, 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  int count = 1;
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    for (int u = 0; u < m; ++u) {
      const bool arc = reversed ? g.has_arc(u, v) : g.has_arc(v, u);
      if (arc && !seen[u]) {
        seen[u] = 1;
        ++count;
        stack.push_back(u);
      }
    }
  }
  return count;
}

}  // namespace

bool is_strongly_connected(const Digraph& g) {
  if (g.size() == 1) return true;
  return reach_count(g, false) == g.size() && reach_count(g, true) == g.size();
}

Matrix flocking_matrix(const Digraph& g) {
  if (!g.has_all_self_loops()) {
    throw InvalidInputError("flocking_matrix: every vertex needs a self-loop");
  }
  const int m = g.size();
  Matrix s = Matrix::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    const auto nbrs = g.in_neighbors(i);
    const double w = 1.0 / static_cast<double>(nbrs.size());
    for (int j : nbrs) s(i, j) = w;
  }
  return s;
}

namespace {

bool stochastic_rows(const Matrix& s, double tol) {
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    if (std::abs(s.row(i).sum() - 1.0) > tol) return false;
    for (Eigen::Index j = 0; j < s.cols(); ++j) {
      if (s(i, j) < -tol) return false;
    }
  }
  return true;
}

Digraph graph_of_transpose(const Matrix& s) {
  // Arc (a, b) iff S(b, a) > 0, i.e. the communication graph that produced
  // the averaging weights.
  Digraph g(static_cast<int>(s.rows()));
  for (Eigen::Index a = 0; a < s.rows(); ++a) {
    for (Eigen::Index b = 0; b < s.cols(); ++b) {
      if (s(b, a) > 0.0) g.add_arc(static_cast<int>(a), static_cast<int>(b));
    }
  }
  return g;
}

Vector perron_power_iteration(const Matrix& st, double tol) {
  const Eigen::Index m = st.rows();
  Vector v = Vector::Constant(m, 1.0 / static_cast<double>(m));
  for (int it = 0; it < 200000; ++it) {
    Vector next = st * v;
    next /= next.sum();
    const double delta = (next - v).cwiseAbs().maxCoeff();
    v = next;
    if (delta < tol * 0.01) return v;
  }
  throw NumericalError("perron_vector: power iteration did not converge");
}

}  // namespace

Vector perron_vector(const Matrix& s, double tol) {
  if (s.rows() != s.cols() || s.rows() == 0) {
    throw InvalidInputError("perron_vector: matrix must be square and nonempty");
  }
  if (!stochastic_rows(s, 1e-9)) {
    throw InvalidInputError("perron_vector: matrix is not row stochastic");
  }
  if (!is_strongly_connected(graph_of_transpose(s))) {
    throw InvalidInputError("perron_vector: graph of S^T is not strongly connected");
  }

  const Matrix st = s.transpose();
  Vector pi;
  Eigen::EigenSolver<Matrix> es(st);
  if (es.info() == Eigen::Success) {
    // Pick the eigenvalue closest to 1; its eigenvector is real up to phase.
    Eigen::Index best = 0;
    double best_dist = std::abs(es.eigenvalues()(0) - std::complex<double>(1.0, 0.0));
    for (Eigen::Index i = 1; i < es.eigenvalues().size(); ++i) {
      const double d = std::abs(es.eigenvalues()(i) - std::complex<double>(1.0, 0.0));
      if (d < best_dist) {
        best = i;
        best_dist = d;
      }
    }
    Eigen::VectorXcd vc = es.eigenvectors().col(best);
    Vector vr = vc.real();
    if (vc.imag().cwiseAbs().maxCoeff() < 1e-9 && std::abs(vr.sum()) > 1e-12) {
      pi = vr / vr.sum();
    }
  }
  if (pi.size() == 0) pi = perron_power_iteration(st, tol);

  const double residual = (st * pi - pi).cwiseAbs().maxCoeff();
  if (residual > 1e2 * tol || pi.minCoeff() <= 0.0) {
    pi = perron_power_iteration(st, tol);
    const double res2 = (st * pi - pi).cwiseAbs().maxCoeff();
    if (res2 > 1e2 * tol || pi.minCoeff() <= 0.0) {
      throw NumericalError("perron_vector: fixed-point residual " + std::to_string(res2) +
                           " exceeds tolerance");
    }
  }
  return pi;
}

LaplacianCertificate laplacian_certificate(const Matrix& s, double tol) {
  LaplacianCertificate cert;
  cert.pi = perron_vector(s);
  const Matrix pi_diag = cert.pi.asDiagonal();
  cert.laplacian = pi_diag - s.transpose() * pi_diag * s;

  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (cert.laplacian + cert.laplacian.transpose()));
  if (es.info() != Eigen::Success) {
    throw NumericalError("laplacian_certificate: eigendecomposition failed");
  }
  const Vector eigs = es.eigenvalues();  // ascending
  cert.min_eigenvalue = eigs(0);
  cert.second_eigenvalue = eigs.size() > 1 ? eigs(1) : 1.0;
  cert.ones_residual =
      (cert.laplacian * Vector::Ones(s.rows())).cwiseAbs().maxCoeff();

  cert.psd = cert.min_eigenvalue >= -tol;
  cert.ones_in_kernel = cert.ones_residual <= tol;
  cert.kernel_dim_one = cert.second_eigenvalue > tol;
  return cert;
}

namespace {

// Deterministic stateless mix so random signals can be evaluated at any tau
// without replaying the sequence.
uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

GraphSchedule::GraphSchedule(std::vector<Digraph> graphs, SignalMode mode,
                             std::vector<int> sequence, int default_index, uint64_t seed)
    : graphs_(std::move(graphs)),
      mode_(mode),
      sequence_(std::move(sequence)),
      default_index_(default_index),
      seed_(seed) {
  if (graphs_.empty()) throw InvalidInputError("schedule: at least one graph is required");
  const int m = graphs_[0].size();
  for (size_t k = 0; k < graphs_.size(); ++k) {
    const Digraph& g = graphs_[k];
    if (g.size() != m) throw InvalidInputError("schedule: graphs disagree on agent count");
    if (!g.has_all_self_loops()) {
      throw InvalidInputError("schedule: graph " + std::to_string(k) + " is missing self-loops");
    }
    if (!is_strongly_connected(g)) {
      throw InvalidInputError("schedule: graph " + std::to_string(k) +
                              " is not strongly connected");
    }
  }
  const int count = graph_count();
  for (int idx : sequence_) {
    if (idx < 0 || idx >= count) {
      throw InvalidInputError("schedule: signal references graph " + std::to_string(idx) +
                              " outside the declared set");
    }
  }
  if (default_index_ < 0 || default_index_ >= count) {
    throw InvalidInputError("schedule: default graph index out of range");
  }
  if (mode_ == SignalMode::Periodic && sequence_.empty()) {
    throw InvalidInputError("schedule: periodic signal needs a nonempty pattern");
  }
}

GraphSchedule GraphSchedule::constant(Digraph g) {
  return GraphSchedule({std::move(g)}, SignalMode::Periodic, {0}, 0, 0);
}

GraphSchedule GraphSchedule::sequence(std::vector<Digraph> graphs, std::vector<int> seq,
                                      int default_index) {
  return GraphSchedule(std::move(graphs), SignalMode::Sequence, std::move(seq), default_index, 0);
}

GraphSchedule GraphSchedule::periodic(std::vector<Digraph> graphs, std::vector<int> pattern) {
  return GraphSchedule(std::move(graphs), SignalMode::Periodic, std::move(pattern), 0, 0);
}

GraphSchedule GraphSchedule::round_robin(std::vector<Digraph> graphs) {
  std::vector<int> pattern(graphs.size());
  for (size_t i = 0; i < pattern.size(); ++i) pattern[i] = static_cast<int>(i);
  return periodic(std::move(graphs), std::move(pattern));
}

GraphSchedule GraphSchedule::random(std::vector<Digraph> graphs, uint64_t seed) {
  return GraphSchedule(std::move(graphs), SignalMode::Random, {}, 0, seed);
}

const Digraph& GraphSchedule::graph(int id) const {
  if (id < 0 || id >= graph_count()) {
    throw InvalidInputError("schedule: graph id out of range");
  }
  return graphs_[id];
}

int GraphSchedule::index_at(long tau) const {
  if (tau < 0) throw InvalidInputError("schedule: tau must be nonnegative");
  switch (mode_) {
    case SignalMode::Sequence:
      if (static_cast<size_t>(tau) < sequence_.size()) return sequence_[tau];
      return default_index_;
    case SignalMode::Periodic:
      return sequence_[static_cast<size_t>(tau) % sequence_.size()];
    case SignalMode::Random:
      return static_cast<int>(splitmix64(seed_ ^ (0x51f15eedULL + static_cast<uint64_t>(tau))) %
                              static_cast<uint64_t>(graph_count()));
  }
  throw InternalError("schedule: unknown signal mode");
}

}  // namespace dobs
