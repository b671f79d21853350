#pragma once

#include <string>
#include <vector>

#include "graph.hpp"
#include "plant.hpp"

namespace dobs {

// Output-injection gain for one agent together with the restriction of its
// closed loop to the agent's unobservable subspace.
struct AgentGain {
  int agent = 0;    // 1-based label
  Matrix K_quot;    // quotient gain, rho(A_quot + K_quot C_quot) <= lambda
  Matrix K;         // lifted gain Q^T K_quot
  Matrix A_restr;   // (A + K C_i) V = V A_restr
};

// Places the spectrum of a + gain * c inside [0, 0.9 * lambda] at evenly
// spaced real targets and returns the gain. Single-output pairs go through
// the Ackermann formula; multi-output pairs assign one eigenvector per
// target. The achieved spectrum is re-verified by an eigensolve.
Matrix place_spectrum(const Matrix& a, const Matrix& c, double lambda);

std::vector<AgentGain> design_gains(const Plant& plant,
                                    const std::vector<ObsDecomposition>& decomps,
                                    double lambda);

// Stacked error-dynamics model across all agents. The state is the stacked
// estimation error, dimension m * n; the unobservable coordinates have total
// dimension n_bar = sum of the per-agent unobservable dimensions.
struct ErrorModel {
  int n = 0;
  int m = 0;
  int n_bar = 0;
  Matrix A_closed;       // block diagonal of A + K_i C_i
  Matrix P_stack;        // block diagonal of the projections V_i V_i^T
  Matrix V_stack;        // mn x n_bar, block diagonal of the V_i
  Matrix Q_stack;        // (mn - n_bar) x mn, block diagonal of the Q_i
  Matrix A_tilde;        // n_bar x n_bar, block diagonal of the restrictions A_restr_i
  Matrix A_quot_closed;  // block diagonal of A_quot_i + K_quot_i C_quot_i
  BlockPartition partition;  // per-agent unobservable block sizes
};

// Assembles the stacked model without identity checks.
ErrorModel assemble_error_model(const Plant& plant,
                                const std::vector<ObsDecomposition>& decomps,
                                const std::vector<AgentGain>& gains);

// Verifies the stacked identities against every declared graph; throws
// InternalError naming the violated equation.
void verify_error_model(const ErrorModel& model, const GraphSchedule& schedule);

// assemble + verify.
ErrorModel build_error_model(const Plant& plant, const std::vector<ObsDecomposition>& decomps,
                             const std::vector<AgentGain>& gains, const GraphSchedule& schedule);

// Consensus restriction B = V^T (S kron I_n) V, assembled blockwise as
// B_ij = S_ij V_i^T V_j.
Matrix consensus_block(const ErrorModel& model, const Matrix& s);

struct LyapunovCertificate {
  Matrix R;                 // diagonal weighting V^T (diag(pi) kron I_n) V
  double margin = 0.0;      // -max eigenvalue of B^T R B - R, positive on success
  double min_r_eigenvalue = 0.0;
  double diag_residual = 0.0;  // distance of R from its expected diagonal form
};

// Proposition-level decrement certificate for one graph. Joint observability
// makes the decrement strict; the margin quantifies it.
LyapunovCertificate lyapunov_certificate(const ErrorModel& model, const Matrix& s);

enum class QMethod { Weighted, Mixed, Explicit };

const char* q_method_name(QMethod m);

struct QSelection {
  long q = 1;
  QMethod method = QMethod::Weighted;
  long p = 1;
  long p_bar = 1;
  // Achieved contraction of A_tilde B(g)^q, maximized over the declared
  // graphs, measured in the norm the method certifies.
  double certified_bound = 0.0;
};

// Smallest q certified through the R-weighted two-norm (constant schedule)
// or the plain two-norm of A_tilde (B^p)^p_bar (switching schedule).
QSelection choose_q_weighted(const ErrorModel& model, const GraphSchedule& schedule,
                             double lambda);

// Smallest q certified through the mixed matrix norm with the fixed burn-in
// power p = (m - 1)^2.
QSelection choose_q_mixed(const ErrorModel& model, const GraphSchedule& schedule, double lambda);

// Error transition factor A_closed (I - P (I - S kron I))^q for one event.
Matrix transition_factor(const ErrorModel& model, const Matrix& s, long q);

// Phi(tau) = F(tau - 1) ... F(0) for tau = 1..tau_max. Each factor is
// cross-checked against its block-triangular form in the [Q; V^T] frame.
std::vector<Matrix> transition_product(const ErrorModel& model, const GraphSchedule& schedule,
                                       long q, long tau_max);

// One line of the certificate report. Informational lines carry context but
// do not participate in the overall verdict.
struct CheckResult {
  std::string name;     // equation or check label, stable across releases
  std::string context;  // e.g. "graph=0" or "agent=2 q=5"
  double value = 0.0;
  double threshold = 0.0;
  bool pass = false;
  bool informational = false;
};

struct CertificateSuite {
  std::vector<CheckResult> checks;

  bool all_pass() const;
  const CheckResult* first_failure() const;
  void add(CheckResult c) { checks.push_back(std::move(c)); }
};

// Full synthesis-time certificate battery: decomposition and gain
// invariants, stacked identities, Lemma and Proposition certificates per
// graph, and the q bounds of both selection methods. explicit_q, when
// nonnull, adds an informational line for a user-forced q.
CertificateSuite run_certificates(const Plant& plant,
                                  const std::vector<ObsDecomposition>& decomps,
                                  const std::vector<AgentGain>& gains, const ErrorModel& model,
                                  const GraphSchedule& schedule, double lambda,
                                  const QSelection& q_weighted, const QSelection& q_mixed,
                                  const long* explicit_q);

}  // namespace dobs
