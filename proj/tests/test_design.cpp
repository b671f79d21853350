#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "design.hpp"
#include "error.hpp"
#include "graph.hpp"
#include "plant.hpp"

using namespace dobs;

namespace {

Matrix randm(std::mt19937_64& rng, int r, int c) {
  std::normal_distribution<double> d(0.0, 1.0);
  Matrix m(r, c);
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < c; ++j) m(i, j) = d(rng);
  }
  return m;
}

std::vector<double> sorted_real_spectrum(const Matrix& m) {
  Eigen::EigenSolver<Matrix> es(m);
  std::vector<double> out;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    out.push_back(es.eigenvalues()(i).real());
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Two sensors on a diagonal plant, each seeing one coordinate. All the
// design quantities have closed forms, frozen below.
struct TwoAgentFixture {
  Plant plant;
  GraphSchedule schedule = GraphSchedule::constant(Digraph::complete(2));
  std::vector<ObsDecomposition> decomps;
  std::vector<AgentGain> gains;
  ErrorModel model;

  explicit TwoAgentFixture(double lambda = 0.8) {
    plant.A = Matrix::Zero(2, 2);
    plant.A(0, 0) = 2.0;
    plant.A(1, 1) = 3.0;
    plant.C = {Matrix::Zero(1, 2), Matrix::Zero(1, 2)};
    plant.C[0](0, 0) = 1.0;
    plant.C[1](0, 1) = 1.0;
    decomps = decompose_all(plant);
    gains = design_gains(plant, decomps, lambda);
    model = build_error_model(plant, decomps, gains, schedule);
  }
};

Digraph random_sc_graph(std::mt19937_64& rng, int m) {
  Digraph g(m);
  for (int i = 0; i < m; ++i) g.add_arc(i, (i + 1) % m);
  g.add_self_loops();
  const int extras = static_cast<int>(rng() % (m + 1));
  for (int e = 0; e < extras; ++e) {
    g.add_arc(static_cast<int>(rng() % m), static_cast<int>(rng() % m));
  }
  return g;
}

// Plant built as U D U^T with each agent reading one rotated mode, so every
// per-agent unobservable subspace has dimension n - 1 while the m >= n
// sensors jointly cover all modes.
Plant random_plant(std::mt19937_64& rng, int n, int m) {
  REQUIRE(m >= n);
  Vector d(n);
  for (int j = 0; j < n; ++j) d(j) = 0.2 + 0.6 * static_cast<double>(j) / n;
  const Matrix u = Eigen::HouseholderQR<Matrix>(randm(rng, n, n)).householderQ();
  Plant p;
  p.A = u * d.asDiagonal() * u.transpose();
  p.C.resize(m);
  for (int i = 0; i < m; ++i) {
    const int k = i < n ? i : static_cast<int>(rng() % n);
    p.C[i] = u.col(k).transpose();
  }
  return p;
}

// The projected consensus step I - P (I - S kron I) assembled directly.
Matrix step_matrix(const ErrorModel& model, const Matrix& s) {
  const Matrix smash = kron(s, Matrix::Identity(model.n, model.n));
  const Matrix id = Matrix::Identity(model.m * model.n, model.m * model.n);
  return id - model.P_stack * (id - smash);
}

}  // namespace

TEST_CASE("placement targets are evenly spaced from zero") {
  Matrix a = Matrix::Zero(2, 2);
  a(0, 0) = 2.0;
  a(1, 1) = 3.0;
  Matrix c(1, 2);
  c << 1, 1;
  const Matrix k = place_spectrum(a, c, 0.8);
  REQUIRE(k.rows() == 2);
  REQUIRE(k.cols() == 1);
  const auto spec = sorted_real_spectrum(a + k * c);
  CHECK(spec[0] == doctest::Approx(0.0).epsilon(1e-8));
  CHECK(spec[1] == doctest::Approx(0.36).epsilon(1e-8));  // 0.9 * 0.8 / 2

  // one-dimensional pair: deadbeat
  Matrix a1(1, 1), c1(1, 1);
  a1 << 2.0;
  c1 << 1.0;
  const Matrix k1 = place_spectrum(a1, c1, 0.8);
  CHECK(k1(0, 0) == doctest::Approx(-2.0).epsilon(1e-12));

  // multi-output route
  std::mt19937_64 rng(41);
  const Matrix a3 = randm(rng, 3, 3);
  const Matrix c3 = randm(rng, 2, 3);
  const Matrix k3 = place_spectrum(a3, c3, 0.6);
  const auto spec3 = sorted_real_spectrum(a3 + k3 * c3);
  CHECK(spec3[0] == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(spec3[1] == doctest::Approx(0.18).epsilon(1e-6));
  CHECK(spec3[2] == doctest::Approx(0.36).epsilon(1e-6));
  CHECK(spectral_radius(a3 + k3 * c3) <= 0.9 * 0.6 + 1e-6);

  // unobservable pair: eigenvalue 3 cannot be moved
  Matrix c_bad(1, 2);
  c_bad << 1, 0;
  CHECK_THROWS(place_spectrum(a, c_bad, 0.8));
}

TEST_CASE("gain design on the two-agent fixture") {
  TwoAgentFixture fx;
  REQUIRE(fx.gains.size() == 2);

  const AgentGain& g1 = fx.gains[0];
  CHECK(g1.agent == 1);
  CHECK(g1.K_quot.rows() == 1);
  // the quotient gain carries the sign of Q; the lifted gain does not
  CHECK(std::abs(g1.K_quot(0, 0)) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(g1.K(0, 0) == doctest::Approx(-2.0).epsilon(1e-12));
  CHECK(std::abs(g1.K(1, 0)) < 1e-12);
  CHECK(g1.A_restr(0, 0) == doctest::Approx(3.0).epsilon(1e-12));

  const AgentGain& g2 = fx.gains[1];
  CHECK(g2.A_restr(0, 0) == doctest::Approx(2.0).epsilon(1e-12));

  for (int i = 0; i < 2; ++i) {
    const AgentGain& g = fx.gains[i];
    const ObsDecomposition& d = fx.decomps[i];
    CHECK(max_abs(g.K - d.Q.transpose() * g.K_quot) < 1e-12);
    const Matrix closed = fx.plant.A + g.K * fx.plant.C[i];
    CHECK(max_abs(closed * d.V - d.V * g.A_restr) < 1e-10);
    CHECK(spectral_radius(d.A_quot + g.K_quot * d.C_quot) <= 0.9 * 0.8 + 1e-9);
  }

  // closed loops are diag(0, 3) and diag(2, 0)
  const Matrix cl1 = fx.plant.A + fx.gains[0].K * fx.plant.C[0];
  CHECK(max_abs(cl1 - (Matrix(2, 2) << 0, 0, 0, 3).finished()) < 1e-12);
  const Matrix cl2 = fx.plant.A + fx.gains[1].K * fx.plant.C[1];
  CHECK(max_abs(cl2 - (Matrix(2, 2) << 2, 0, 0, 0).finished()) < 1e-12);
}

TEST_CASE("error model on the two-agent fixture") {
  TwoAgentFixture fx;
  const ErrorModel& em = fx.model;
  CHECK(em.n == 2);
  CHECK(em.m == 2);
  CHECK(em.n_bar == 2);
  REQUIRE(em.partition.row_sizes == std::vector<int>({1, 1}));

  Matrix a_tilde(2, 2);
  a_tilde << 3, 0, 0, 2;
  CHECK(max_abs(em.A_tilde - a_tilde) < 1e-12);

  const Matrix s = flocking_matrix(fx.schedule.graph(0));
  const Matrix b = consensus_block(em, s);
  CHECK(max_abs(b - 0.5 * Matrix::Identity(2, 2)) < 1e-12);

  // P_stack = blockdiag(e2 e2^T, e1 e1^T)
  Matrix p_expect = Matrix::Zero(4, 4);
  p_expect(1, 1) = 1.0;
  p_expect(2, 2) = 1.0;
  CHECK(max_abs(em.P_stack - p_expect) < 1e-12);
}

TEST_CASE("consensus block equals the kron form") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 25; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 3);
    const int m = n + static_cast<int>(rng() % 2);
    const Plant plant = random_plant(rng, n, m);
    const auto decomps = decompose_all(plant);
    const auto gains = design_gains(plant, decomps, 0.8);
    const GraphSchedule sched = GraphSchedule::constant(random_sc_graph(rng, m));
    const ErrorModel model = build_error_model(plant, decomps, gains, sched);
    const Matrix s = flocking_matrix(sched.graph(0));

    const Matrix direct = model.V_stack.transpose() *
                          kron(s, Matrix::Identity(n, n)) * model.V_stack;
    CHECK(max_abs(consensus_block(model, s) - direct) < 1e-12);
  }
}

TEST_CASE("stacked identities hold at several consensus depths") {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 15; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 3);
    const int m = n + static_cast<int>(rng() % 2);
    const Plant plant = random_plant(rng, n, m);
    const auto decomps = decompose_all(plant);
    const auto gains = design_gains(plant, decomps, 0.7);
    const GraphSchedule sched = GraphSchedule::constant(random_sc_graph(rng, m));
    const ErrorModel model = build_error_model(plant, decomps, gains, sched);
    const Matrix s = flocking_matrix(sched.graph(0));
    const Matrix mstep = step_matrix(model, s);
    const Matrix b = consensus_block(model, s);

    // quotient and restriction intertwinings of the closed loop
    CHECK(max_abs(model.Q_stack * model.A_closed - model.A_quot_closed * model.Q_stack) < 1e-9);
    CHECK(max_abs(model.A_closed * model.V_stack - model.V_stack * model.A_tilde) < 1e-9);

    for (long q : {1L, 2L, 5L}) {
      const Matrix mq = matrix_power(mstep, q);
      CHECK(max_abs(model.Q_stack * mq - model.Q_stack) < 1e-9);
      CHECK(max_abs(mq * model.V_stack - model.V_stack * matrix_power(b, q)) < 1e-9);

      // transition factor is block triangular in the [Q; V^T] frame
      const Matrix f = transition_factor(model, s, q);
      CHECK(max_abs(f - model.A_closed * mq) < 1e-9);
      CHECK(max_abs(model.Q_stack * f * model.V_stack) < 1e-8);
      CHECK(max_abs(model.V_stack.transpose() * f * model.V_stack -
                    model.A_tilde * matrix_power(b, q)) < 1e-8);
    }
  }
}

TEST_CASE("lyapunov certificate on the two-agent fixture") {
  TwoAgentFixture fx;
  const Matrix s = flocking_matrix(fx.schedule.graph(0));
  const LyapunovCertificate ly = lyapunov_certificate(fx.model, s);
  CHECK(max_abs(ly.R - 0.5 * Matrix::Identity(2, 2)) < 1e-12);
  CHECK(ly.diag_residual < 1e-12);
  CHECK(ly.min_r_eigenvalue == doctest::Approx(0.5).epsilon(1e-10));
  // B^T R B - R = -0.375 I
  CHECK(ly.margin == doctest::Approx(0.375).epsilon(1e-10));
}

TEST_CASE("lyapunov margin is positive under joint observability") {
  std::mt19937_64 rng(44);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 3);
    const int m = n + static_cast<int>(rng() % 2);
    const Plant plant = random_plant(rng, n, m);
    const auto decomps = decompose_all(plant);
    const auto gains = design_gains(plant, decomps, 0.8);
    const GraphSchedule sched = GraphSchedule::constant(random_sc_graph(rng, m));
    const ErrorModel model = build_error_model(plant, decomps, gains, sched);
    const Matrix s = flocking_matrix(sched.graph(0));
    const LyapunovCertificate ly = lyapunov_certificate(model, s);
    CHECK(ly.margin > 0.0);
    CHECK(ly.diag_residual < 1e-10);
    CHECK(ly.min_r_eigenvalue > 0.0);

    // R recomputed blockwise from the Perron weights
    const Vector pi = perron_vector(s);
    Matrix expected = Matrix::Zero(model.n_bar, model.n_bar);
    int off = 0;
    for (int i = 0; i < model.m; ++i) {
      const int ni = model.partition.row_sizes[i];
      expected.block(off, off, ni, ni) = pi(i) * Matrix::Identity(ni, ni);
      off += ni;
    }
    CHECK(max_abs(ly.R - expected) < 1e-10);
  }
}

TEST_CASE("q selection on the two-agent fixture") {
  TwoAgentFixture fx;
  const double lambda = 0.8;

  const QSelection w = choose_q_weighted(fx.model, fx.schedule, lambda);
  CHECK(w.method == QMethod::Weighted);
  CHECK(w.q == 2);
  CHECK(w.p == 1);
  CHECK(w.p_bar == 2);
  CHECK(w.certified_bound == doctest::Approx(0.75).epsilon(1e-12));

  const QSelection x = choose_q_mixed(fx.model, fx.schedule, lambda);
  CHECK(x.method == QMethod::Mixed);
  CHECK(x.p == 1);  // (m - 1)^2
  CHECK(x.q == 2);
  CHECK(x.certified_bound == doctest::Approx(0.75).epsilon(1e-12));

  CHECK_THROWS_AS(choose_q_weighted(fx.model, fx.schedule, 1.5), InvalidInputError);
  CHECK_THROWS_AS(choose_q_mixed(fx.model, fx.schedule, 0.0), InvalidInputError);
}

TEST_CASE("q selection properties on random scenarios") {
  std::mt19937_64 rng(45);
  for (int trial = 0; trial < 12; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 3);
    const int m = n + static_cast<int>(rng() % 2);
    const double lambda = 0.6 + 0.05 * static_cast<double>(rng() % 7);
    const Plant plant = random_plant(rng, n, m);
    const auto decomps = decompose_all(plant);
    const auto gains = design_gains(plant, decomps, lambda);
    std::vector<Digraph> graphs{random_sc_graph(rng, m)};
    if (rng() % 2) graphs.push_back(random_sc_graph(rng, m));
    const GraphSchedule sched = GraphSchedule::round_robin(graphs);
    const ErrorModel model = build_error_model(plant, decomps, gains, sched);

    const QSelection w = choose_q_weighted(model, sched, lambda);
    CHECK(w.certified_bound <= lambda + 1e-12);
    CHECK(w.q == w.p * w.p_bar);
    CHECK(w.q >= 1);

    const QSelection x = choose_q_mixed(model, sched, lambda);
    CHECK(x.p == (m - 1) * (m - 1));
    CHECK(x.certified_bound <= lambda + 1e-12);

    // both bounds recomputed from scratch in the certifying norm
    double wb = 0.0, xb = 0.0;
    for (int gid = 0; gid < sched.graph_count(); ++gid) {
      const Matrix s = flocking_matrix(sched.graph(gid));
      const Matrix bw = model.A_tilde * matrix_power(consensus_block(model, s), w.q);
      if (sched.graph_count() == 1) {
        wb = std::max(wb, weighted_two_norm(bw, lyapunov_certificate(model, s).R));
      } else {
        wb = std::max(wb, induced_two_norm(bw));
      }
      const Matrix bx = model.A_tilde * matrix_power(consensus_block(model, s), x.q);
      xb = std::max(xb, mixed_matrix_norm(bx, model.partition));
    }
    CHECK(wb == doctest::Approx(w.certified_bound).epsilon(1e-10));
    CHECK(xb == doctest::Approx(x.certified_bound).epsilon(1e-10));

    // the spectral radius never exceeds the certified operator norm
    for (int gid = 0; gid < sched.graph_count(); ++gid) {
      const Matrix s = flocking_matrix(sched.graph(gid));
      const Matrix g = model.A_tilde * matrix_power(consensus_block(model, s), w.q);
      CHECK(spectral_radius(g) <= w.certified_bound + 1e-9);
    }
  }
}

TEST_CASE("q selection collapses when everything is observable") {
  Plant plant;
  plant.A = Matrix::Zero(2, 2);
  plant.A(0, 0) = 2.0;
  plant.A(1, 1) = 3.0;
  plant.C = {Matrix::Identity(2, 2), Matrix::Identity(2, 2)};
  const auto decomps = decompose_all(plant);
  const auto gains = design_gains(plant, decomps, 0.8);
  const GraphSchedule sched = GraphSchedule::constant(Digraph::complete(2));
  const ErrorModel model = build_error_model(plant, decomps, gains, sched);
  CHECK(model.n_bar == 0);

  for (const QSelection sel :
       {choose_q_weighted(model, sched, 0.8), choose_q_mixed(model, sched, 0.8)}) {
    CHECK(sel.q == 1);
    CHECK(sel.p == 1);
    CHECK(sel.p_bar == 1);
    CHECK(sel.certified_bound == 0.0);
  }

  const Matrix s = flocking_matrix(sched.graph(0));
  const LyapunovCertificate ly = lyapunov_certificate(model, s);
  CHECK(std::isinf(ly.margin));
  CHECK(ly.R.rows() == 0);
}

TEST_CASE("model verification names the violated identity") {
  TwoAgentFixture fx;
  CHECK_NOTHROW(verify_error_model(fx.model, fx.schedule));

  ErrorModel broken = fx.model;
  broken.A_tilde(0, 0) += 0.5;
  CHECK_THROWS_AS(verify_error_model(broken, fx.schedule), InternalError);
  try {
    verify_error_model(broken, fx.schedule);
  } catch (const InternalError& e) {
    CHECK(std::string(e.what()).find("Eq(") != std::string::npos);
  }
}

TEST_CASE("transition product equals the plain factor product") {
  TwoAgentFixture fx;
  const long q = 2;
  const long tau_max = 6;
  const auto phis = transition_product(fx.model, fx.schedule, q, tau_max);
  REQUIRE(phis.size() == static_cast<size_t>(tau_max));

  Matrix acc = Matrix::Identity(4, 4);
  for (long tau = 0; tau < tau_max; ++tau) {
    const Matrix s = fx.schedule.flocking_at(tau);
    acc = transition_factor(fx.model, s, q) * acc;
    CHECK(max_abs(phis[static_cast<size_t>(tau)] - acc) < 1e-10);
  }

  CHECK_THROWS_AS(transition_factor(fx.model, flocking_matrix(fx.schedule.graph(0)), 0),
                  InvalidInputError);
}

TEST_CASE("certificate battery on a sound design") {
  TwoAgentFixture fx;
  const QSelection w = choose_q_weighted(fx.model, fx.schedule, 0.8);
  const QSelection x = choose_q_mixed(fx.model, fx.schedule, 0.8);
  const CertificateSuite suite = run_certificates(fx.plant, fx.decomps, fx.gains, fx.model,
                                                  fx.schedule, 0.8, w, x, nullptr);
  CHECK(suite.all_pass());
  CHECK(suite.first_failure() == nullptr);
  CHECK(suite.checks.size() > 20);

  // every advertised family shows up
  for (const char* name : {"Eq(pr1)", "Eq(pr2)", "Lemma(brian)", "Prop(mp)", "Eq(ly)",
                           "Eq(rajit)", "Eq(as)", "qbound_weighted", "qbound_mixed",
                           "gain_lift"}) {
    bool found = false;
    for (const auto& c : suite.checks) {
      if (c.name == name) found = true;
    }
    CHECK_MESSAGE(found, name);
  }
}

TEST_CASE("certificate battery flags corrupted gains") {
  TwoAgentFixture fx;
  std::vector<AgentGain> bad = fx.gains;
  bad[0].K.setZero();
  const QSelection w = choose_q_weighted(fx.model, fx.schedule, 0.8);
  const QSelection x = choose_q_mixed(fx.model, fx.schedule, 0.8);
  const CertificateSuite suite = run_certificates(fx.plant, fx.decomps, bad, fx.model,
                                                  fx.schedule, 0.8, w, x, nullptr);
  CHECK_FALSE(suite.all_pass());
  REQUIRE(suite.first_failure() != nullptr);
  CHECK(suite.first_failure()->name == "gain_lift");
}

TEST_CASE("informational lines never fail the suite") {
  CertificateSuite suite;
  CheckResult ok;
  ok.name = "a";
  ok.pass = true;
  suite.add(ok);
  CheckResult info;
  info.name = "b";
  info.pass = false;
  info.informational = true;
  suite.add(info);
  CHECK(suite.all_pass());
  CHECK(suite.first_failure() == nullptr);

  CheckResult hard = info;
  hard.name = "c";
  hard.informational = false;
  suite.add(hard);
  CHECK_FALSE(suite.all_pass());
  REQUIRE(suite.first_failure() != nullptr);
  CHECK(suite.first_failure()->name == "c");
}

TEST_CASE("q method names are stable") {
  CHECK(std::string(q_method_name(QMethod::Weighted)) == "weighted");
  CHECK(std::string(q_method_name(QMethod::Mixed)) == "mixed");
  CHECK(std::string(q_method_name(QMethod::Explicit)) == "explicit");
}
