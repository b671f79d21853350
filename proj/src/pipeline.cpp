#include "pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "error.hpp"

namespace dobs {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

}  // namespace

Design synthesize(const ScenarioConfig& cfg) {
  cfg.plant.validate();
  if (cfg.schedule.agent_count() != cfg.plant.m()) {
    throw InvalidInputError("synthesize: schedule agent count does not match the plant");
  }
  if (!joint_observability(cfg.plant)) {
    throw InvalidInputError("synthesize: plant is not jointly observable across the network");
  }

  Design d;
  d.lambda = cfg.lambda;
  d.decomps = decompose_all(cfg.plant);
  d.gains = design_gains(cfg.plant, d.decomps, cfg.lambda);
  d.model = build_error_model(cfg.plant, d.decomps, d.gains, cfg.schedule);
  d.q_weighted = choose_q_weighted(d.model, cfg.schedule, cfg.lambda);
  d.q_mixed = choose_q_mixed(d.model, cfg.schedule, cfg.lambda);
  d.active_method = cfg.q_method;
  switch (cfg.q_method) {
    case QMethod::Weighted:
      d.active_q = d.q_weighted.q;
      d.active_bound = d.q_weighted.certified_bound;
      break;
    case QMethod::Mixed:
      d.active_q = d.q_mixed.q;
      d.active_bound = d.q_mixed.certified_bound;
      break;
    case QMethod::Explicit:
      d.active_q = cfg.explicit_q;
      d.active_bound = direct_q_bound(d.model, cfg.schedule, cfg.explicit_q);
      break;
  }
  const long explicit_q = cfg.explicit_q;
  d.certificates = run_certificates(cfg.plant, d.decomps, d.gains, d.model, cfg.schedule,
                                    cfg.lambda, d.q_weighted, d.q_mixed,
                                    cfg.q_method == QMethod::Explicit ? &explicit_q : nullptr);
  return d;
}

double direct_q_bound(const ErrorModel& model, const GraphSchedule& schedule, long q) {
  if (model.n_bar == 0) return 0.0;
  double worst = 0.0;
  for (int gid = 0; gid < schedule.graph_count(); ++gid) {
    const Matrix b = consensus_block(model, flocking_matrix(schedule.graph(gid)));
    worst = std::max(worst, induced_two_norm(model.A_tilde * matrix_power(b, q)));
  }
  return worst;
}

SimScenario make_sim_scenario(const ScenarioConfig& cfg, const Design& design) {
  SimScenario ss;
  ss.plant = cfg.plant;
  ss.schedule = cfg.schedule;
  ss.gains = design.gains;
  ss.projections.reserve(design.decomps.size());
  for (const ObsDecomposition& d : design.decomps) ss.projections.push_back(d.P);
  ss.q = design.active_q;
  ss.x0 = initial_state(cfg);
  ss.x_hat0 = cfg.x_hat0;
  ss.tau_max = cfg.tau_max;
  ss.record_rounds = cfg.verbose;
  return ss;
}

namespace {

// C fitted over tau <= 5 such that the total error obeys C lambda^tau on the
// fit window; the bound is then tested for every tau and agent.
struct RateFit {
  double c = 0.0;
  bool bound_satisfied = false;
};

// Largest state or estimate magnitude on the trace. Cancellation in
// x_hat - x leaves absolute noise of order eps times this, which swamps any
// fixed relative tolerance once the plant state grows large.
double trace_state_magnitude(const SimTrace& trace) {
  double mag = 0.0;
  for (const TraceRow& row : trace.rows) {
    mag = std::max(mag, row.x.norm());
    for (const Vector& xh : row.x_hat) mag = std::max(mag, xh.norm());
  }
  return mag;
}

double error_floor(const SimTrace& trace) {
  return 1e-12 * (1.0 + trace.rows.front().total_error) +
         64.0 * std::numeric_limits<double>::epsilon() * trace_state_magnitude(trace);
}

RateFit fit_rate_bound(const SimTrace& trace, double lambda, double floor) {
  RateFit fit;
  const long fit_window = std::min<long>(5, static_cast<long>(trace.rows.size()) - 1);
  double power = 1.0;
  for (long t = 0; t <= fit_window; ++t) {
    fit.c = std::max(fit.c, trace.rows[t].total_error / power);
    power *= lambda;
  }
  fit.bound_satisfied = true;
  power = 1.0;
  for (const TraceRow& row : trace.rows) {
    const double bound = fit.c * power + floor;
    for (double e : row.agent_error) {
      if (e > bound) {
        fit.bound_satisfied = false;
        break;
      }
    }
    if (!fit.bound_satisfied) break;
    power *= lambda;
  }
  return fit;
}

}  // namespace

SimSummary summarize(const SimTrace& trace, const ScenarioConfig& cfg, const Design& design) {
  if (trace.rows.empty()) throw InvalidInputError("summarize: empty trace");
  SimSummary s;
  s.lambda = cfg.lambda;
  s.method = design.active_method;
  s.q = design.active_q;
  s.tau_max = static_cast<long>(trace.rows.size()) - 1;
  s.initial_error = trace.rows.front().total_error;
  s.final_error = trace.rows.back().total_error;

  if (s.tau_max >= 2) {
    s.rate_lo = std::min<long>(5, s.tau_max - 1);
    if (s.rate_lo < 1) s.rate_lo = 1;
    s.rate_hi = s.tau_max;
    s.measured_rate = estimate_rate(trace, s.rate_lo, s.rate_hi);
    s.rate_available = true;
  }

  const double floor = error_floor(trace);
  const RateFit fit = fit_rate_bound(trace, cfg.lambda, floor);
  s.fit_c = fit.c;
  s.bound_satisfied = fit.bound_satisfied;
  s.rate_target_met = fit.bound_satisfied;
  return s;
}

std::string summary_to_text(const SimSummary& s) {
  std::string out = "dobs simulation summary\n";
  out += "schema: 1\n";
  out += "lambda: " + fmt(s.lambda) + "\n";
  out += "q_method: " + std::string(q_method_name(s.method)) + "\n";
  out += "q: " + std::to_string(s.q) + "\n";
  out += "tau_max: " + std::to_string(s.tau_max) + "\n";
  out += "initial_error: " + fmt(s.initial_error) + "\n";
  out += "final_error: " + fmt(s.final_error) + "\n";
  if (s.rate_available) {
    out += "measured_rate: " + fmt(s.measured_rate) + "\n";
    out += "rate_window: [" + std::to_string(s.rate_lo) + ", " + std::to_string(s.rate_hi) +
           "]\n";
  } else {
    out += "measured_rate: n/a\n";
    out += "rate_window: n/a\n";
  }
  out += "fit_C: " + fmt(s.fit_c) + "\n";
  out += "bound_satisfied: " + std::string(s.bound_satisfied ? "yes" : "no") + "\n";
  out += "rate_target_met: " + std::string(s.rate_target_met ? "yes" : "no") + "\n";
  return out;
}

namespace {

void append_sim_checks(CertificateSuite& suite, const ScenarioConfig& cfg,
                       const Design& design) {
  try {
    SimScenario ss = make_sim_scenario(cfg, design);
    const SimTrace trace = run(ss);
    const long tau_max = static_cast<long>(trace.rows.size()) - 1;

    const std::vector<Matrix> phis =
        transition_product(design.model, cfg.schedule, design.active_q, tau_max);
    const Vector e0 = trace.stacked_error(0);
    const double scale = e0.norm();
    double worst = 0.0;
    for (long tau = 0; tau <= tau_max; ++tau) {
      const Vector expected = tau == 0 ? e0 : Vector(phis[tau - 1] * e0);
      worst = std::max(worst, (trace.stacked_error(tau) - expected).norm());
    }
    const double rel = scale > 0.0 ? worst / scale : worst;
    const double fp_floor =
        64.0 * std::numeric_limits<double>::epsilon() * trace_state_magnitude(trace);
    const double tol = 1e-8 + (scale > 0.0 ? fp_floor / scale : fp_floor);
    CheckResult oracle;
    oracle.name = "Eq(error)";
    oracle.context = "q=" + std::to_string(design.active_q);
    oracle.value = rel;
    oracle.threshold = tol;
    oracle.pass = rel <= tol;
    suite.add(oracle);

    const double floor = error_floor(trace);
    const RateFit fit = fit_rate_bound(trace, cfg.lambda, floor);
    double worst_ratio = 0.0;
    double power = 1.0;
    for (const TraceRow& row : trace.rows) {
      const double bound = fit.c * power + floor;
      for (double e : row.agent_error) worst_ratio = std::max(worst_ratio, e / bound);
      power *= cfg.lambda;
    }
    CheckResult rate;
    rate.name = "rate_bound";
    rate.context = "fit_C=" + fmt(fit.c);
    rate.value = worst_ratio;
    rate.threshold = 1.0;
    rate.pass = fit.bound_satisfied;
    suite.add(rate);

    if (tau_max >= 12) {
      const long hi = std::min<long>(30, tau_max);
      const double n5 = induced_two_norm(phis[4]);
      const double nhi = induced_two_norm(phis[hi - 1]);
      if (n5 > 0.0) {
        const double decay = std::pow(nhi / n5, 1.0 / static_cast<double>(hi - 5));
        CheckResult phi;
        phi.name = "Eq(phi)";
        phi.context = "window=[5, " + std::to_string(hi) + "]";
        phi.value = decay;
        phi.threshold = cfg.lambda + 0.05;
        phi.pass = decay <= cfg.lambda + 0.05;
        suite.add(phi);
      }
    }
  } catch (const std::exception& e) {
    CheckResult failed;
    failed.name = "simulation";
    failed.context = std::string("error=") + e.what();
    failed.value = 0.0;
    failed.threshold = 0.0;
    failed.pass = false;
    suite.add(failed);
  }
}

}  // namespace

VerifyResult verify_scenario(const ScenarioConfig& cfg, const Design* design) {
  VerifyResult out;
  Design local;
  if (design == nullptr) {
    local = synthesize(cfg);
    design = &local;
  }
  out.suite = design->certificates;
  append_sim_checks(out.suite, cfg, *design);
  out.pass = out.suite.all_pass();
  return out;
}

VerifyResult verify_builtin(uint64_t seed) {
  VerifyResult out;
  struct Spec {
    int m;
    int n;
    double lambda;
    int graphs;
  };
  const Spec specs[] = {
      {2, 2, 0.8, 1}, {3, 4, 0.6, 3}, {2, 3, 0.95, 3},
      {4, 5, 0.8, 3}, {3, 3, 0.6, 1}, {5, 4, 0.95, 3},
  };
  int idx = 0;
  for (const Spec& sp : specs) {
    RandomScenarioSpec rs;
    rs.m = sp.m;
    rs.n = sp.n;
    rs.lambda = sp.lambda;
    rs.graph_count = sp.graphs;
    rs.tau_max = 40;
    rs.seed = seed + static_cast<uint64_t>(idx) * 1000003ULL + 1;
    rs.q_method = (idx % 2 == 0) ? QMethod::Weighted : QMethod::Mixed;
    const std::string ctx = "scenario=" + std::to_string(idx);
    try {
      const ScenarioConfig cfg = make_random_scenario(rs);
      VerifyResult r = verify_scenario(cfg, nullptr);
      for (CheckResult c : r.suite.checks) {
        c.context = c.context.empty() ? ctx : ctx + " " + c.context;
        out.suite.add(std::move(c));
      }
    } catch (const std::exception& e) {
      CheckResult failed;
      failed.name = "scenario_synthesis";
      failed.context = ctx + " error=" + e.what();
      failed.pass = false;
      out.suite.add(failed);
    }
    ++idx;
  }

  std::mt19937_64 rng(seed ^ 0xb1e55edULL);
  for (int t = 0; t < 30; ++t) {
    const int m = 2 + static_cast<int>(rng() % 7);
    const Digraph g = random_strongly_connected_graph(m, rng);
    const std::string ctx = "sweep=" + std::to_string(t) + " m=" + std::to_string(m);
    try {
      const LaplacianCertificate cert = laplacian_certificate(flocking_matrix(g));
      CheckResult c;
      c.name = "Lemma(brian)";
      c.context = ctx;
      c.value = cert.min_eigenvalue;
      c.threshold = -1e-9;
      c.pass = cert.ok();
      out.suite.add(c);
    } catch (const std::exception& e) {
      CheckResult failed;
      failed.name = "Lemma(brian)";
      failed.context = ctx + " error=" + e.what();
      failed.pass = false;
      out.suite.add(failed);
    }
  }

  out.pass = out.suite.all_pass();
  return out;
}

}  // namespace dobs
