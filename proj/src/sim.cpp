#include "sim.hpp"

#include <cmath>
#include <cstdio>
#include <string>

#include "error.hpp"

namespace dobs {

namespace {

constexpr double kOverflowGuard = 1e12;

// Fixed 15-significant-digit formatting keeps CSV output byte-deterministic
// for identical runs while exceeding the 12-digit contract.
void append_number(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.15g", v);
  out += buf;
}

}  // namespace

void consensus_round(std::vector<AgentState>& states, const Digraph& graph,
                     const std::vector<Matrix>& projections) {
  const size_t m = states.size();
  if (static_cast<size_t>(graph.size()) != m || projections.size() != m) {
    throw InvalidInputError("consensus_round: state, graph and projection counts differ");
  }
  std::vector<Vector> snapshot(m);
  for (size_t i = 0; i < m; ++i) snapshot[i] = states[i].z;

  for (size_t i = 0; i < m; ++i) {
    const auto nbrs = graph.in_neighbors(static_cast<int>(i));
    Vector sum = Vector::Zero(snapshot[i].size());
    for (int j : nbrs) sum += snapshot[j];
    states[i].z = snapshot[i] - projections[i] * snapshot[i] +
                  projections[i] * (sum / static_cast<double>(nbrs.size()));
  }
}

void event_step(std::vector<AgentState>& states, Vector& x, const Plant& plant,
                const std::vector<Matrix>& closed_loops, const std::vector<AgentGain>& gains,
                const std::vector<Matrix>& projections, const Digraph& graph, long q,
                long tau, std::vector<RoundRow>* round_log) {
  const size_t m = states.size();
  for (size_t i = 0; i < m; ++i) states[i].z = states[i].x_hat;
  for (long k = 1; k <= q; ++k) {
    consensus_round(states, graph, projections);
    if (round_log != nullptr) {
      RoundRow row;
      row.tau = tau;
      row.round = k;
      row.agent_error.reserve(m);
      for (size_t i = 0; i < m; ++i) row.agent_error.push_back((states[i].z - x).norm());
      round_log->push_back(std::move(row));
    }
  }
  // Measurement update: agents see the plant only through y_i = C_i x.
  for (size_t i = 0; i < m; ++i) {
    const Vector y = plant.C[i] * x;
    states[i].x_hat = closed_loops[i] * states[i].z - gains[i].K * y;
  }
  x = plant.A * x;
}

Vector SimTrace::stacked_error(long tau) const {
  if (tau < 0 || static_cast<size_t>(tau) >= rows.size()) {
    throw InvalidInputError("trace: tau outside the recorded range");
  }
  const TraceRow& row = rows[tau];
  Vector e(static_cast<Eigen::Index>(m) * n);
  for (int i = 0; i < m; ++i) e.segment(static_cast<Eigen::Index>(i) * n, n) = row.x_hat[i] - row.x;
  return e;
}

SimTrace run(const SimScenario& scenario) {
  scenario.plant.validate();
  const int m = scenario.plant.m();
  const int n = scenario.plant.n();
  if (scenario.schedule.agent_count() != m) {
    throw InvalidInputError("run: schedule agent count does not match the plant");
  }
  if (static_cast<int>(scenario.gains.size()) != m ||
      static_cast<int>(scenario.projections.size()) != m) {
    throw InvalidInputError("run: need one gain and one projection per agent");
  }
  if (scenario.q < 1) throw InvalidInputError("run: q must be at least 1");
  if (scenario.tau_max < 0) throw InvalidInputError("run: tau_max must be nonnegative");
  if (scenario.x0.size() != n) throw InvalidInputError("run: x0 must have dimension n");
  if (!scenario.x_hat0.empty() && static_cast<int>(scenario.x_hat0.size()) != m) {
    throw InvalidInputError("run: x_hat0 must be empty or carry one vector per agent");
  }

  std::vector<Matrix> closed_loops;
  closed_loops.reserve(m);
  for (int i = 0; i < m; ++i) {
    if (scenario.gains[i].K.rows() != n || scenario.gains[i].K.cols() != scenario.plant.C[i].rows()) {
      throw InvalidInputError("run: gain dimensions do not match the plant");
    }
    if (scenario.projections[i].rows() != n || scenario.projections[i].cols() != n) {
      throw InvalidInputError("run: projections must be n x n");
    }
    closed_loops.push_back(scenario.plant.A + scenario.gains[i].K * scenario.plant.C[i]);
  }

  Vector x = scenario.x0;
  std::vector<AgentState> states(m);
  for (int i = 0; i < m; ++i) {
    states[i].x_hat = scenario.x_hat0.empty() ? Vector::Zero(n) : scenario.x_hat0[i];
    if (states[i].x_hat.size() != n) {
      throw InvalidInputError("run: x_hat0 entries must have dimension n");
    }
    states[i].z = Vector::Zero(n);
  }

  SimTrace trace;
  trace.m = m;
  trace.n = n;
  trace.rows.reserve(scenario.tau_max + 1);

  for (long tau = 0;; ++tau) {
    TraceRow row;
    row.tau = tau;
    row.graph_id = scenario.schedule.index_at(tau);
    row.x = x;
    row.x_hat.reserve(m);
    row.agent_error.reserve(m);
    double sq = 0.0;
    for (int i = 0; i < m; ++i) {
      row.x_hat.push_back(states[i].x_hat);
      const double err = (states[i].x_hat - x).norm();
      row.agent_error.push_back(err);
      sq += err * err;
    }
    row.total_error = std::sqrt(sq);
    trace.rows.push_back(std::move(row));

    if (tau == scenario.tau_max) break;

    event_step(states, x, scenario.plant, closed_loops, scenario.gains, scenario.projections,
               scenario.schedule.at(tau), scenario.q, tau,
               scenario.record_rounds ? &trace.rounds : nullptr);

    double magnitude = x.cwiseAbs().maxCoeff();
    for (int i = 0; i < m; ++i) {
      magnitude = std::max(magnitude, states[i].x_hat.cwiseAbs().maxCoeff());
    }
    if (!std::isfinite(magnitude) || magnitude > kOverflowGuard) {
      throw NumericalError("run: state magnitude exceeded 1e12 at tau " +
                           std::to_string(tau + 1) + ", simulation aborted");
    }
  }
  return trace;
}

double estimate_rate(const SimTrace& trace, long tau_lo, long tau_hi) {
  if (tau_lo < 1 || tau_hi <= tau_lo ||
      static_cast<size_t>(tau_hi) >= trace.rows.size()) {
    throw InvalidInputError("estimate_rate: window must satisfy 1 <= tau_lo < tau_hi <= tau_max");
  }
  for (long t = tau_lo; t <= tau_hi; ++t) {
    if (trace.rows[t].total_error == 0.0) return 0.0;
  }
  const double ratio = trace.rows[tau_hi].total_error / trace.rows[tau_lo].total_error;
  return std::pow(ratio, 1.0 / static_cast<double>(tau_hi - tau_lo));
}

std::string trace_to_csv(const SimTrace& trace, bool include_state) {
  std::string out = "tau,graph_id,err_norm_total";
  for (int i = 1; i <= trace.m; ++i) out += ",err_norm_agent_" + std::to_string(i);
  if (include_state) {
    for (int j = 1; j <= trace.n; ++j) out += ",x_" + std::to_string(j);
    for (int i = 1; i <= trace.m; ++i) {
      for (int j = 1; j <= trace.n; ++j) {
        out += ",x_hat_" + std::to_string(i) + "_" + std::to_string(j);
      }
    }
  }
  out += "\n";
  for (const TraceRow& row : trace.rows) {
    out += std::to_string(row.tau);
    out += ",";
    out += std::to_string(row.graph_id);
    out += ",";
    append_number(out, row.total_error);
    for (double e : row.agent_error) {
      out += ",";
      append_number(out, e);
    }
    if (include_state) {
      for (Eigen::Index j = 0; j < row.x.size(); ++j) {
        out += ",";
        append_number(out, row.x(j));
      }
      for (const Vector& xh : row.x_hat) {
        for (Eigen::Index j = 0; j < xh.size(); ++j) {
          out += ",";
          append_number(out, xh(j));
        }
      }
    }
    out += "\n";
  }
  return out;
}

std::string rounds_to_csv(const SimTrace& trace) {
  std::string out = "tau,round";
  for (int i = 1; i <= trace.m; ++i) out += ",consensus_err_agent_" + std::to_string(i);
  out += "\n";
  for (const RoundRow& row : trace.rounds) {
    out += std::to_string(row.tau);
    out += ",";
    out += std::to_string(row.round);
    for (double e : row.agent_error) {
      out += ",";
      append_number(out, e);
    }
    out += "\n";
  }
  return out;
}

}  // namespace dobs
