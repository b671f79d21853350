#include "doctest.h"

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "design.hpp"
#include "error.hpp"
#include "graph.hpp"
#include "plant.hpp"
#include "sim.hpp"

using namespace dobs;

namespace {

// Stable two-sensor diagonal plant with the full design pipeline applied.
struct StableFixture {
  Plant plant;
  GraphSchedule schedule = GraphSchedule::constant(Digraph::complete(2));
  std::vector<ObsDecomposition> decomps;
  std::vector<AgentGain> gains;
  ErrorModel model;

  StableFixture() {
    plant.A = Matrix::Zero(2, 2);
    plant.A(0, 0) = 0.5;
    plant.A(1, 1) = 0.9;
    plant.C = {Matrix::Zero(1, 2), Matrix::Zero(1, 2)};
    plant.C[0](0, 0) = 1.0;
    plant.C[1](0, 1) = 1.0;
    decomps = decompose_all(plant);
    gains = design_gains(plant, decomps, 0.8);
    model = build_error_model(plant, decomps, gains, schedule);
  }

  SimScenario scenario(long q, long tau_max) const {
    SimScenario sc;
    sc.plant = plant;
    sc.schedule = schedule;
    sc.gains = gains;
    for (const auto& d : decomps) sc.projections.push_back(d.P);
    sc.q = q;
    sc.x0 = Vector(2);
    sc.x0 << 0.1, 0.2;
    sc.tau_max = tau_max;
    return sc;
  }
};

std::vector<AgentState> make_states(const std::vector<Vector>& z) {
  std::vector<AgentState> out(z.size());
  for (size_t i = 0; i < z.size(); ++i) {
    out[i].x_hat = z[i];
    out[i].z = z[i];
  }
  return out;
}

}  // namespace

TEST_CASE("consensus round extremes") {
  const Digraph g = Digraph::complete(2);
  Vector z1(2), z2(2);
  z1 << 1, 2;
  z2 << 5, 10;

  // zero projection: nothing moves
  auto frozen = make_states({z1, z2});
  consensus_round(frozen, g, {Matrix::Zero(2, 2), Matrix::Zero(2, 2)});
  CHECK((frozen[0].z - z1).cwiseAbs().maxCoeff() == 0.0);
  CHECK((frozen[1].z - z2).cwiseAbs().maxCoeff() == 0.0);

  // identity projection: plain neighborhood averaging
  auto avg = make_states({z1, z2});
  consensus_round(avg, g, {Matrix::Identity(2, 2), Matrix::Identity(2, 2)});
  const Vector mean = 0.5 * (z1 + z2);
  CHECK((avg[0].z - mean).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((avg[1].z - mean).cwiseAbs().maxCoeff() < 1e-15);

  auto bad = make_states({z1, z2});
  CHECK_THROWS_AS(consensus_round(bad, g, {Matrix::Identity(2, 2)}), InvalidInputError);
  CHECK_THROWS_AS(consensus_round(bad, Digraph::complete(3),
                                  {Matrix::Zero(2, 2), Matrix::Zero(2, 2)}),
                  InvalidInputError);
}

TEST_CASE("consensus round uses the previous-round snapshot") {
  // directed ring with self-loops: each agent averages itself and one source
  Digraph ring(3);
  ring.add_arc(0, 1);
  ring.add_arc(1, 2);
  ring.add_arc(2, 0);
  ring.add_self_loops();

  Vector a(1), b(1), c(1);
  a << 0.0;
  b << 6.0;
  c << 12.0;
  auto states = make_states({a, b, c});
  std::vector<Matrix> proj(3, Matrix::Identity(1, 1));
  consensus_round(states, ring, proj);

  // all updates read the old values, so agent 1's new value cannot leak into
  // agent 2 within the same round
  CHECK(states[0].z(0) == doctest::Approx(6.0));   // (0 + 12) / 2
  CHECK(states[1].z(0) == doctest::Approx(3.0));   // (6 + 0) / 2
  CHECK(states[2].z(0) == doctest::Approx(9.0));   // (12 + 6) / 2
}

TEST_CASE("exact estimates stay exact") {
  StableFixture fx;
  SimScenario sc = fx.scenario(2, 30);
  sc.x_hat0 = {sc.x0, sc.x0};
  const SimTrace trace = run(sc);
  REQUIRE(trace.rows.size() == 31);
  for (const TraceRow& row : trace.rows) {
    CHECK(row.total_error < 1e-12);
  }
}

TEST_CASE("trace matches the stacked transition product") {
  StableFixture fx;
  for (long q : {1L, 2L, 3L}) {
    SimScenario sc = fx.scenario(q, 12);
    const SimTrace trace = run(sc);
    const auto phis = transition_product(fx.model, fx.schedule, q, 12);
    const Vector e0 = trace.stacked_error(0);
    for (long tau = 1; tau <= 12; ++tau) {
      const Vector predicted = phis[static_cast<size_t>(tau - 1)] * e0;
      const Vector actual = trace.stacked_error(tau);
      CHECK((actual - predicted).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("simulation is deterministic and order-insensitive") {
  StableFixture fx;
  const SimScenario sc = fx.scenario(2, 20);
  const SimTrace t1 = run(sc);
  const SimTrace t2 = run(sc);
  CHECK(trace_to_csv(t1, true) == trace_to_csv(t2, true));

  // relabeling the agents permutes the trace columns exactly
  Plant swapped = fx.plant;
  std::swap(swapped.C[0], swapped.C[1]);
  const auto decomps = decompose_all(swapped);
  const auto gains = design_gains(swapped, decomps, 0.8);
  SimScenario sw = sc;
  sw.plant = swapped;
  sw.gains = gains;
  sw.projections.clear();
  for (const auto& d : decomps) sw.projections.push_back(d.P);
  const SimTrace t3 = run(sw);
  REQUIRE(t3.rows.size() == t1.rows.size());
  for (size_t r = 0; r < t1.rows.size(); ++r) {
    CHECK(t1.rows[r].agent_error[0] == doctest::Approx(t3.rows[r].agent_error[1]).epsilon(1e-13));
    CHECK(t1.rows[r].agent_error[1] == doctest::Approx(t3.rows[r].agent_error[0]).epsilon(1e-13));
    CHECK(t1.rows[r].total_error == doctest::Approx(t3.rows[r].total_error).epsilon(1e-13));
  }
}

TEST_CASE("rate estimate recovers a geometric decay") {
  SimTrace trace;
  trace.m = 1;
  trace.n = 1;
  const double lambda = 0.73;
  for (long tau = 0; tau <= 20; ++tau) {
    TraceRow row;
    row.tau = tau;
    row.total_error = 2.0 * std::pow(lambda, static_cast<double>(tau));
    trace.rows.push_back(row);
  }
  CHECK(estimate_rate(trace, 1, 20) == doctest::Approx(lambda).epsilon(1e-12));
  CHECK(estimate_rate(trace, 5, 10) == doctest::Approx(lambda).epsilon(1e-12));

  trace.rows[7].total_error = 0.0;
  CHECK(estimate_rate(trace, 5, 10) == 0.0);

  CHECK_THROWS_AS(estimate_rate(trace, 0, 10), InvalidInputError);
  CHECK_THROWS_AS(estimate_rate(trace, 10, 10), InvalidInputError);
  CHECK_THROWS_AS(estimate_rate(trace, 1, 21), InvalidInputError);
}

TEST_CASE("round log carries q rows per event") {
  StableFixture fx;
  SimScenario sc = fx.scenario(3, 5);
  sc.record_rounds = true;
  const SimTrace trace = run(sc);
  REQUIRE(trace.rounds.size() == 15);
  for (size_t k = 0; k < trace.rounds.size(); ++k) {
    CHECK(trace.rounds[k].tau == static_cast<long>(k / 3));
    CHECK(trace.rounds[k].round == static_cast<long>(k % 3) + 1);
    CHECK(trace.rounds[k].agent_error.size() == 2);
  }

  SimScenario quiet = fx.scenario(3, 5);
  CHECK(run(quiet).rounds.empty());
}

TEST_CASE("single-row trace at tau_max zero") {
  StableFixture fx;
  const SimTrace trace = run(fx.scenario(1, 0));
  REQUIRE(trace.rows.size() == 1);
  CHECK(trace.rows[0].tau == 0);
  // x0 = (0.1, 0.2), both estimates start at zero
  const double expect = std::sqrt(2.0 * (0.01 + 0.04));
  CHECK(trace.rows[0].total_error == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("overflow guard aborts divergent runs") {
  StableFixture fx;
  SimScenario sc = fx.scenario(1, 200);
  sc.plant.A(0, 0) = 2.0;
  sc.plant.A(1, 1) = 3.0;  // estimates no longer track, state explodes
  sc.gains[0].K.setZero();
  sc.gains[1].K.setZero();
  CHECK_THROWS_AS(run(sc), NumericalError);
}

TEST_CASE("scenario validation") {
  StableFixture fx;

  SimScenario bad_q = fx.scenario(0, 5);
  CHECK_THROWS_AS(run(bad_q), InvalidInputError);

  SimScenario bad_tau = fx.scenario(1, -1);
  CHECK_THROWS_AS(run(bad_tau), InvalidInputError);

  SimScenario bad_x0 = fx.scenario(1, 5);
  bad_x0.x0 = Vector::Zero(3);
  CHECK_THROWS_AS(run(bad_x0), InvalidInputError);

  SimScenario bad_gains = fx.scenario(1, 5);
  bad_gains.gains.pop_back();
  CHECK_THROWS_AS(run(bad_gains), InvalidInputError);

  SimScenario bad_hat = fx.scenario(1, 5);
  bad_hat.x_hat0 = {Vector::Zero(2)};
  CHECK_THROWS_AS(run(bad_hat), InvalidInputError);

  SimScenario bad_sched = fx.scenario(1, 5);
  bad_sched.schedule = GraphSchedule::constant(Digraph::complete(3));
  CHECK_THROWS_AS(run(bad_sched), InvalidInputError);
}

TEST_CASE("trace csv layout") {
  StableFixture fx;
  const SimTrace trace = run(fx.scenario(2, 3));

  const std::string plain = trace_to_csv(trace, false);
  CHECK(plain.rfind("tau,graph_id,err_norm_total,err_norm_agent_1,err_norm_agent_2\n", 0) == 0);
  size_t lines = 0;
  for (char ch : plain) lines += ch == '\n';
  CHECK(lines == 5);  // header + tau 0..3

  const std::string with_state = trace_to_csv(trace, true);
  CHECK(with_state.find(",x_1,x_2,x_hat_1_1,x_hat_1_2,x_hat_2_1,x_hat_2_2\n") !=
        std::string::npos);

  // 15 significant digits: the initial total error is sqrt(0.1)
  CHECK(plain.find("0.316227766016838") != std::string::npos);

  SimScenario sc = fx.scenario(2, 3);
  sc.record_rounds = true;
  const SimTrace logged = run(sc);
  const std::string rounds = rounds_to_csv(logged);
  CHECK(rounds.rfind("tau,round,consensus_err_agent_1,consensus_err_agent_2\n", 0) == 0);

  CHECK_THROWS_AS(trace.stacked_error(99), InvalidInputError);
}
