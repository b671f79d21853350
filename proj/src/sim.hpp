#pragma once

#include <string>
#include <vector>

#include "design.hpp"
#include "graph.hpp"
#include "plant.hpp"

namespace dobs {

// Per-agent simulation state. z is the consensus scratch value exchanged
// between events; agents never see the plant state directly, only their own
// measurement y_i = C_i x.
struct AgentState {
  Vector x_hat;
  Vector z;
};

// One synchronous projected-averaging round. Every agent mixes the
// previous-round values of its in-neighbors along its unobservable
// directions; the snapshot realizes the simultaneous update, so the agent
// processing order cannot influence the result.
void consensus_round(std::vector<AgentState>& states, const Digraph& graph,
                     const std::vector<Matrix>& projections);

struct SimScenario {
  Plant plant;
  GraphSchedule schedule = GraphSchedule::constant(Digraph::complete(2));
  std::vector<AgentGain> gains;
  std::vector<Matrix> projections;  // P_i from the decompositions
  long q = 1;
  Vector x0;
  std::vector<Vector> x_hat0;  // empty means all zero
  long tau_max = 0;
  bool record_rounds = false;
};

struct TraceRow {
  long tau = 0;
  int graph_id = 0;
  Vector x;
  std::vector<Vector> x_hat;
  std::vector<double> agent_error;  // |x_hat_i - x|_2
  double total_error = 0.0;         // stacked error norm
};

struct RoundRow {
  long tau = 0;
  long round = 0;
  std::vector<double> agent_error;  // |z_i - x|_2 after the round
};

struct SimTrace {
  int m = 0;
  int n = 0;
  std::vector<TraceRow> rows;
  std::vector<RoundRow> rounds;  // only populated when record_rounds is set

  // Stacked error vector (x_hat_i - x for every agent) at a recorded tau.
  Vector stacked_error(long tau) const;
};

// One event interval: q consensus rounds on the interval's graph, then the
// measurement update and the plant step.
void event_step(std::vector<AgentState>& states, Vector& x, const Plant& plant,
                const std::vector<Matrix>& closed_loops, const std::vector<AgentGain>& gains,
                const std::vector<Matrix>& projections, const Digraph& graph, long q,
                long tau, std::vector<RoundRow>* round_log);

SimTrace run(const SimScenario& scenario);

// Geometric-mean per-step decay of the total error over [tau_lo, tau_hi].
// Returns 0 when some norm on the window vanishes.
double estimate_rate(const SimTrace& trace, long tau_lo, long tau_hi);

std::string trace_to_csv(const SimTrace& trace, bool include_state);
std::string rounds_to_csv(const SimTrace& trace);

}  // namespace dobs
