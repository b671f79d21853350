#pragma once

#include <string>

#include "design.hpp"
#include "scenario.hpp"
#include "sim.hpp"

namespace dobs {

// Complete synthesis artifact for one scenario: decompositions, gains, the
// stacked error model, both q selections, the active choice, and the
// certificate battery that was run against all of it.
struct Design {
  double lambda = 0.8;
  std::vector<ObsDecomposition> decomps;
  std::vector<AgentGain> gains;
  ErrorModel model;
  QSelection q_weighted;
  QSelection q_mixed;
  QMethod active_method = QMethod::Weighted;
  long active_q = 1;
  double active_bound = 0.0;  // achieved norm for the active q
  CertificateSuite certificates;
};

// Synthesis pipeline. Structural problems (bad dimensions, joint
// observability failure, placement breakdown) throw; certificate outcomes
// land in the suite for the caller to inspect.
Design synthesize(const ScenarioConfig& cfg);

// Achieved contraction of A_tilde B^q maximized over the declared graphs,
// measured in the plain two-norm.
double direct_q_bound(const ErrorModel& model, const GraphSchedule& schedule, long q);

SimScenario make_sim_scenario(const ScenarioConfig& cfg, const Design& design);

struct SimSummary {
  double lambda = 0.8;
  QMethod method = QMethod::Weighted;
  long q = 1;
  long tau_max = 0;
  double initial_error = 0.0;
  double final_error = 0.0;
  bool rate_available = false;
  double measured_rate = 0.0;
  long rate_lo = 0;
  long rate_hi = 0;
  double fit_c = 0.0;       // C fitted over tau <= 5 so that |e(tau)| <= C lambda^tau
  bool bound_satisfied = false;
  bool rate_target_met = false;
};

SimSummary summarize(const SimTrace& trace, const ScenarioConfig& cfg, const Design& design);
std::string summary_to_text(const SimSummary& summary);

struct VerifyResult {
  CertificateSuite suite;
  bool pass = false;
};

// Certificate battery plus simulation-backed checks (trace against the
// transition product, the fitted rate bound, transition decay). When design
// is null the scenario is synthesized first.
VerifyResult verify_scenario(const ScenarioConfig& cfg, const Design* design);

// Seeded randomized suite over generated scenarios plus a Laplacian
// certificate sweep over random strongly connected graphs.
VerifyResult verify_builtin(uint64_t seed);

}  // namespace dobs
