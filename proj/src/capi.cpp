#include "dobs/dobs.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <limits>
#include <new>
#include <string>
#include <utility>

#include "artifacts.hpp"
#include "error.hpp"
#include "pipeline.hpp"
#include "scenario.hpp"
#include "sim.hpp"

struct dobs_scenario {
  dobs::ScenarioConfig cfg;
};

struct dobs_design {
  dobs::Design design;
};

struct dobs_trace {
  dobs::SimTrace trace;
};

namespace {

thread_local std::string t_error;
thread_local std::string t_check;

void clear_error() {
  t_error.clear();
  t_check.clear();
}

dobs_status fail(dobs_status status, const std::string& message,
                 const std::string& check = "") {
  t_error = message;
  t_check = check;
  return status;
}

// Out-params are only assigned on success, so callers keep a clean pointer
// state on failure.
char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out != nullptr) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

template <typename Fn>
dobs_status guarded(Fn&& fn) {
  try {
    clear_error();
    return fn();
  } catch (const dobs::InvalidInputError& e) {
    return fail(DOBS_ERR_INVALID_INPUT, e.what());
  } catch (const dobs::CertificateError& e) {
    return fail(DOBS_ERR_CERTIFICATE, e.what());
  } catch (const dobs::NumericalError& e) {
    return fail(DOBS_ERR_NUMERICAL, e.what());
  } catch (const dobs::IOError& e) {
    return fail(DOBS_ERR_IO, e.what());
  } catch (const dobs::InternalError& e) {
    return fail(DOBS_ERR_INTERNAL, e.what());
  } catch (const std::bad_alloc&) {
    return fail(DOBS_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(DOBS_ERR_INTERNAL, e.what());
  }
}

dobs_status require(bool ok, const char* what) {
  if (ok) return DOBS_OK;
  return fail(DOBS_ERR_INVALID_INPUT, std::string("null argument: ") + what);
}

dobs_status emit_string(const std::string& text, char** out) {
  char* copy = dup_string(text);
  if (copy == nullptr) return fail(DOBS_ERR_INTERNAL, "out of memory");
  *out = copy;
  return DOBS_OK;
}

void note_failures(const dobs::Design& design) {
  const dobs::CheckResult* first = design.certificates.first_failure();
  if (first != nullptr) t_check = first->name;
}

}  // namespace

extern "C" {

const char* dobs_status_name(dobs_status status) {
  switch (status) {
    case DOBS_OK: return "ok";
    case DOBS_ERR_INVALID_INPUT: return "invalid_input";
    case DOBS_ERR_CERTIFICATE: return "certificate";
    case DOBS_ERR_NUMERICAL: return "numerical";
    case DOBS_ERR_IO: return "io";
    case DOBS_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* dobs_last_error(void) { return t_error.c_str(); }

const char* dobs_last_error_check(void) { return t_check.c_str(); }

void dobs_string_free(char* text) { std::free(text); }

dobs_status dobs_scenario_load_file(const char* path, dobs_scenario** out) {
  if (dobs_status s = require(path != nullptr && out != nullptr, "dobs_scenario_load_file"))
    return s;
  return guarded([&] {
    auto* sc = new dobs_scenario{dobs::load_scenario_file(path)};
    *out = sc;
    return DOBS_OK;
  });
}

dobs_status dobs_scenario_load_string(const char* json_text, dobs_scenario** out) {
  if (dobs_status s =
          require(json_text != nullptr && out != nullptr, "dobs_scenario_load_string"))
    return s;
  return guarded([&] {
    auto* sc = new dobs_scenario{dobs::parse_scenario_json(json_text)};
    *out = sc;
    return DOBS_OK;
  });
}

void dobs_scenario_free(dobs_scenario* scenario) { delete scenario; }

dobs_status dobs_scenario_override_seed(dobs_scenario* scenario, uint64_t seed) {
  if (dobs_status s = require(scenario != nullptr, "dobs_scenario_override_seed")) return s;
  clear_error();
  scenario->cfg.seed = seed;
  return DOBS_OK;
}

dobs_status dobs_scenario_set_verbose(dobs_scenario* scenario, int verbose) {
  if (dobs_status s = require(scenario != nullptr, "dobs_scenario_set_verbose")) return s;
  clear_error();
  scenario->cfg.verbose = verbose != 0;
  return DOBS_OK;
}

int dobs_scenario_agent_count(const dobs_scenario* scenario) {
  return scenario == nullptr ? -1 : scenario->cfg.plant.m();
}

int dobs_scenario_state_dim(const dobs_scenario* scenario) {
  return scenario == nullptr ? -1 : scenario->cfg.plant.n();
}

dobs_status dobs_synthesize(const dobs_scenario* scenario, dobs_design** out) {
  if (dobs_status s = require(scenario != nullptr && out != nullptr, "dobs_synthesize"))
    return s;
  return guarded([&] {
    auto* d = new dobs_design{dobs::synthesize(scenario->cfg)};
    note_failures(d->design);
    *out = d;
    return DOBS_OK;
  });
}

void dobs_design_free(dobs_design* design) { delete design; }

long long dobs_design_q(const dobs_design* design) {
  return design == nullptr ? -1 : design->design.active_q;
}

double dobs_design_certified_bound(const dobs_design* design) {
  return design == nullptr ? std::numeric_limits<double>::quiet_NaN()
                           : design->design.active_bound;
}

const char* dobs_design_method(const dobs_design* design) {
  return design == nullptr ? "" : dobs::q_method_name(design->design.active_method);
}

int dobs_design_certificates_pass(const dobs_design* design) {
  return design == nullptr ? -1 : (design->design.certificates.all_pass() ? 1 : 0);
}

dobs_status dobs_design_first_failure(const dobs_design* design, char** out) {
  if (dobs_status s = require(design != nullptr && out != nullptr, "dobs_design_first_failure"))
    return s;
  clear_error();
  const dobs::CheckResult* first = design->design.certificates.first_failure();
  return emit_string(first == nullptr ? "" : first->name, out);
}

dobs_status dobs_design_report(const dobs_design* design, const dobs_scenario* scenario,
                               char** out) {
  if (dobs_status s = require(design != nullptr && scenario != nullptr && out != nullptr,
                              "dobs_design_report"))
    return s;
  return guarded([&] {
    return emit_string(dobs::report_to_text(design->design, scenario->cfg), out);
  });
}

dobs_status dobs_design_save(const dobs_design* design, const char* path) {
  if (dobs_status s = require(design != nullptr && path != nullptr, "dobs_design_save"))
    return s;
  return guarded([&] {
    dobs::write_text_file(path, dobs::design_to_json(design->design));
    return DOBS_OK;
  });
}

dobs_status dobs_design_load(const dobs_scenario* scenario, const char* path,
                             dobs_design** out) {
  if (dobs_status s = require(scenario != nullptr && path != nullptr && out != nullptr,
                              "dobs_design_load"))
    return s;
  return guarded([&] {
    auto* d = new dobs_design{dobs::load_design_file(scenario->cfg, path)};
    note_failures(d->design);
    *out = d;
    return DOBS_OK;
  });
}

dobs_status dobs_simulate(const dobs_scenario* scenario, const dobs_design* design,
                          dobs_trace** out) {
  if (dobs_status s = require(scenario != nullptr && design != nullptr && out != nullptr,
                              "dobs_simulate"))
    return s;
  return guarded([&] {
    const dobs::SimScenario sim = dobs::make_sim_scenario(scenario->cfg, design->design);
    auto* t = new dobs_trace{dobs::run(sim)};
    *out = t;
    return DOBS_OK;
  });
}

void dobs_trace_free(dobs_trace* trace) { delete trace; }

long long dobs_trace_rows(const dobs_trace* trace) {
  return trace == nullptr ? -1 : static_cast<long long>(trace->trace.rows.size());
}

double dobs_trace_error_norm(const dobs_trace* trace, long long row) {
  if (trace == nullptr || row < 0 ||
      row >= static_cast<long long>(trace->trace.rows.size())) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  return trace->trace.rows[static_cast<size_t>(row)].total_error;
}

dobs_status dobs_trace_csv(const dobs_trace* trace, int include_state, char** out) {
  if (dobs_status s = require(trace != nullptr && out != nullptr, "dobs_trace_csv")) return s;
  return guarded([&] {
    return emit_string(dobs::trace_to_csv(trace->trace, include_state != 0), out);
  });
}

dobs_status dobs_trace_rounds_csv(const dobs_trace* trace, char** out) {
  if (dobs_status s = require(trace != nullptr && out != nullptr, "dobs_trace_rounds_csv"))
    return s;
  return guarded([&] { return emit_string(dobs::rounds_to_csv(trace->trace), out); });
}

dobs_status dobs_trace_summary(const dobs_trace* trace, const dobs_scenario* scenario,
                               const dobs_design* design, char** out) {
  if (dobs_status s = require(trace != nullptr && scenario != nullptr && design != nullptr &&
                                  out != nullptr,
                              "dobs_trace_summary"))
    return s;
  return guarded([&] {
    const dobs::SimSummary summary =
        dobs::summarize(trace->trace, scenario->cfg, design->design);
    return emit_string(dobs::summary_to_text(summary), out);
  });
}

int dobs_trace_rate_target_met(const dobs_trace* trace, const dobs_scenario* scenario,
                               const dobs_design* design) {
  if (trace == nullptr || scenario == nullptr || design == nullptr) return -1;
  int met = -1;
  dobs_status s = guarded([&] {
    met = dobs::summarize(trace->trace, scenario->cfg, design->design).rate_target_met ? 1 : 0;
    return DOBS_OK;
  });
  return s == DOBS_OK ? met : -1;
}

dobs_status dobs_verify(const dobs_scenario* scenario, const dobs_design* design,
                        char** out_report, int* out_pass) {
  if (dobs_status s = require(scenario != nullptr && out_report != nullptr &&
                                  out_pass != nullptr,
                              "dobs_verify"))
    return s;
  return guarded([&] {
    const dobs::VerifyResult result =
        dobs::verify_scenario(scenario->cfg, design == nullptr ? nullptr : &design->design);
    if (dobs_status s =
            emit_string(dobs::verify_report_to_text(result.suite, result.pass), out_report))
      return s;
    *out_pass = result.pass ? 1 : 0;
    if (!result.pass) {
      const dobs::CheckResult* first = result.suite.first_failure();
      if (first != nullptr) t_check = first->name;
    }
    return DOBS_OK;
  });
}

dobs_status dobs_verify_builtin(uint64_t seed, char** out_report, int* out_pass) {
  if (dobs_status s =
          require(out_report != nullptr && out_pass != nullptr, "dobs_verify_builtin"))
    return s;
  return guarded([&] {
    const dobs::VerifyResult result = dobs::verify_builtin(seed);
    if (dobs_status s =
            emit_string(dobs::verify_report_to_text(result.suite, result.pass), out_report))
      return s;
    *out_pass = result.pass ? 1 : 0;
    if (!result.pass) {
      const dobs::CheckResult* first = result.suite.first_failure();
      if (first != nullptr) t_check = first->name;
    }
    return DOBS_OK;
  });
}

}  // extern "C"
