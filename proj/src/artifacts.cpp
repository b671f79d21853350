#include "artifacts.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "error.hpp"

namespace dobs {

using json = nlohmann::ordered_json;

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

json matrix_to_json(const Matrix& m) {
  json out;
  out["rows"] = m.rows();
  out["cols"] = m.cols();
  json data = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  out["data"] = std::move(data);
  return out;
}

Matrix matrix_from_json(const json& j, const std::string& what) {
  if (!j.is_object() || !j.contains("rows") || !j.contains("cols") || !j.contains("data") ||
      !j["data"].is_array()) {
    throw InvalidInputError("design file: " + what + " must be {rows, cols, data}");
  }
  const long rows = j["rows"].get<long>();
  const long cols = j["cols"].get<long>();
  if (rows < 0 || cols < 0 ||
      j["data"].size() != static_cast<size_t>(rows) * static_cast<size_t>(cols)) {
    throw InvalidInputError("design file: " + what + " dimensions disagree with the data");
  }
  Matrix m(rows, cols);
  size_t k = 0;
  for (long r = 0; r < rows; ++r) {
    for (long c = 0; c < cols; ++c) {
      if (!j["data"][k].is_number()) {
        throw InvalidInputError("design file: " + what + " entries must be numbers");
      }
      m(r, c) = j["data"][k].get<double>();
      ++k;
    }
  }
  if (!all_finite(m)) {
    throw InvalidInputError("design file: " + what + " has non-finite entries");
  }
  return m;
}

json selection_to_json(const QSelection& sel) {
  json out;
  out["q"] = sel.q;
  out["p"] = sel.p;
  out["p_bar"] = sel.p_bar;
  out["certified_bound"] = sel.certified_bound;
  return out;
}

QSelection selection_from_json(const json& j, QMethod method, const std::string& what) {
  if (!j.is_object() || !j.contains("q") || !j.contains("p") || !j.contains("p_bar")) {
    throw InvalidInputError("design file: " + what + " must carry q, p and p_bar");
  }
  QSelection sel;
  sel.method = method;
  sel.q = j["q"].get<long>();
  sel.p = j["p"].get<long>();
  sel.p_bar = j["p_bar"].get<long>();
  if (j.contains("certified_bound")) sel.certified_bound = j["certified_bound"].get<double>();
  if (sel.q < 1 || sel.p < 1 || sel.p_bar < 1) {
    throw InvalidInputError("design file: " + what + " counts must be at least 1");
  }
  return sel;
}

}  // namespace

std::string design_to_json(const Design& design) {
  json j;
  j["kind"] = "dobs-design";
  j["version"] = 1;
  j["lambda"] = design.lambda;
  j["q_method"] = q_method_name(design.active_method);
  j["q"] = design.active_q;
  j["certified_bound"] = design.active_bound;
  j["q_weighted"] = selection_to_json(design.q_weighted);
  j["q_mixed"] = selection_to_json(design.q_mixed);

  json agents = json::array();
  for (size_t i = 0; i < design.gains.size(); ++i) {
    const ObsDecomposition& d = design.decomps[i];
    const AgentGain& g = design.gains[i];
    json a;
    a["agent"] = g.agent;
    a["unobs_dim"] = d.unobs_dim;
    a["V"] = matrix_to_json(d.V);
    a["Q"] = matrix_to_json(d.Q);
    a["A_quot"] = matrix_to_json(d.A_quot);
    a["C_quot"] = matrix_to_json(d.C_quot);
    a["K_quot"] = matrix_to_json(g.K_quot);
    a["K"] = matrix_to_json(g.K);
    a["A_restr"] = matrix_to_json(g.A_restr);
    agents.push_back(std::move(a));
  }
  j["agents"] = std::move(agents);
  return j.dump(2) + "\n";
}

Design design_from_json(const ScenarioConfig& cfg, const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInputError(std::string("design file: JSON parse failed: ") + e.what());
  }
  try {
    if (!j.is_object() || !j.contains("kind") || j["kind"] != "dobs-design") {
      throw InvalidInputError("design file: missing kind marker 'dobs-design'");
    }
    if (!j.contains("version") || j["version"].get<int>() != 1) {
      throw InvalidInputError("design file: unsupported version");
    }

    Design d;
    d.lambda = j["lambda"].get<double>();
    if (std::abs(d.lambda - cfg.lambda) > 1e-12) {
      throw InvalidInputError("design file: lambda " + fmt(d.lambda) +
                              " disagrees with the scenario lambda " + fmt(cfg.lambda));
    }
    const std::string method = j["q_method"].get<std::string>();
    if (method == "weighted") {
      d.active_method = QMethod::Weighted;
    } else if (method == "mixed") {
      d.active_method = QMethod::Mixed;
    } else if (method == "explicit") {
      d.active_method = QMethod::Explicit;
    } else {
      throw InvalidInputError("design file: unknown q_method '" + method + "'");
    }
    d.active_q = j["q"].get<long>();
    if (d.active_q < 1) throw InvalidInputError("design file: q must be at least 1");
    if (j.contains("certified_bound")) d.active_bound = j["certified_bound"].get<double>();
    d.q_weighted = selection_from_json(j["q_weighted"], QMethod::Weighted, "q_weighted");
    d.q_mixed = selection_from_json(j["q_mixed"], QMethod::Mixed, "q_mixed");

    if (!j.contains("agents") || !j["agents"].is_array() ||
        j["agents"].size() != cfg.plant.C.size()) {
      throw InvalidInputError("design file: agent count disagrees with the scenario");
    }
    const int n = cfg.plant.n();
    for (size_t i = 0; i < j["agents"].size(); ++i) {
      const json& a = j["agents"][i];
      const std::string who = "agents[" + std::to_string(i) + "]";
      ObsDecomposition dec;
      dec.agent = static_cast<int>(i) + 1;
      dec.unobs_dim = a["unobs_dim"].get<int>();
      dec.V = matrix_from_json(a["V"], who + ".V");
      dec.Q = matrix_from_json(a["Q"], who + ".Q");
      dec.A_quot = matrix_from_json(a["A_quot"], who + ".A_quot");
      dec.C_quot = matrix_from_json(a["C_quot"], who + ".C_quot");
      if (dec.V.rows() != n || dec.V.cols() != dec.unobs_dim || dec.Q.rows() != n - dec.unobs_dim ||
          dec.Q.cols() != n) {
        throw InvalidInputError("design file: " + who + " subspace dimensions are inconsistent");
      }
      dec.P = dec.V * dec.V.transpose();

      AgentGain g;
      g.agent = dec.agent;
      g.K_quot = matrix_from_json(a["K_quot"], who + ".K_quot");
      g.K = matrix_from_json(a["K"], who + ".K");
      g.A_restr = matrix_from_json(a["A_restr"], who + ".A_restr");
      if (g.K.rows() != n || g.K.cols() != cfg.plant.C[i].rows() ||
          g.A_restr.rows() != dec.unobs_dim || g.A_restr.cols() != dec.unobs_dim) {
        throw InvalidInputError("design file: " + who + " gain dimensions are inconsistent");
      }
      d.decomps.push_back(std::move(dec));
      d.gains.push_back(std::move(g));
    }

    d.model = assemble_error_model(cfg.plant, d.decomps, d.gains);
    const long explicit_q = d.active_q;
    d.certificates = run_certificates(cfg.plant, d.decomps, d.gains, d.model, cfg.schedule,
                                      cfg.lambda, d.q_weighted, d.q_mixed,
                                      d.active_method == QMethod::Explicit ? &explicit_q
                                                                           : nullptr);
    return d;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInputError(std::string("design file: malformed field: ") + e.what());
  }
}

Design load_design_file(const ScenarioConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IOError("design file: cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return design_from_json(cfg, ss.str());
}

namespace {

void append_check_lines(std::string& out, const CertificateSuite& suite) {
  for (const CheckResult& c : suite.checks) {
    out += "check name=" + c.name;
    if (!c.context.empty()) out += " " + c.context;
    out += " value=" + fmt(c.value) + " threshold=" + fmt(c.threshold) + " status=";
    if (c.informational) {
      out += c.pass ? "info-pass" : "info-fail";
    } else {
      out += c.pass ? "pass" : "fail";
    }
    out += "\n";
  }
}

std::string selection_line(const char* name, const QSelection& sel) {
  return std::string(name) + ": q=" + std::to_string(sel.q) + " p=" + std::to_string(sel.p) +
         " p_bar=" + std::to_string(sel.p_bar) +
         " certified_bound=" + fmt(sel.certified_bound) + "\n";
}

}  // namespace

std::string report_to_text(const Design& design, const ScenarioConfig& cfg) {
  std::string out = "dobs certificate report\n";
  out += "schema: 1\n";
  out += "lambda: " + fmt(design.lambda) + "\n";
  out += "agents: " + std::to_string(cfg.plant.m()) + "\n";
  out += "state_dim: " + std::to_string(cfg.plant.n()) + "\n";
  out += "unobs_dim_total: " + std::to_string(design.model.n_bar) + "\n";
  out += "graphs: " + std::to_string(cfg.schedule.graph_count()) + "\n";
  out += "q_method: " + std::string(q_method_name(design.active_method)) + "\n";
  out += "q: " + std::to_string(design.active_q) + "\n";
  out += "certified_bound: " + fmt(design.active_bound) + "\n";
  out += selection_line("q_weighted", design.q_weighted);
  out += selection_line("q_mixed", design.q_mixed);
  append_check_lines(out, design.certificates);
  out += "result: " + std::string(design.certificates.all_pass() ? "pass" : "fail") + "\n";
  return out;
}

std::string verify_report_to_text(const CertificateSuite& suite, bool pass) {
  std::string out = "dobs verification report\n";
  out += "schema: 1\n";
  out += "checks: " + std::to_string(suite.checks.size()) + "\n";
  append_check_lines(out, suite);
  out += "result: " + std::string(pass ? "pass" : "fail") + "\n";
  return out;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IOError("cannot open '" + path + "' for writing");
  out << content;
  if (!out) throw IOError("write to '" + path + "' failed");
}

}  // namespace dobs
