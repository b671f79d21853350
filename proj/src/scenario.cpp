#include "scenario.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

#include "error.hpp"

namespace dobs {

using json = nlohmann::ordered_json;

namespace {

Matrix parse_matrix(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) {
    throw InvalidInputError("config: " + what + " must be a nonempty array of rows");
  }
  const size_t rows = j.size();
  size_t cols = 0;
  Matrix out;
  for (size_t r = 0; r < rows; ++r) {
    const json& row = j[r];
    if (!row.is_array() || row.empty()) {
      throw InvalidInputError("config: " + what + " rows must be nonempty arrays");
    }
    if (r == 0) {
      cols = row.size();
      out.resize(rows, cols);
    } else if (row.size() != cols) {
      throw InvalidInputError("config: " + what + " rows have inconsistent lengths");
    }
    for (size_t c = 0; c < cols; ++c) {
      if (!row[c].is_number()) {
        throw InvalidInputError("config: " + what + " entries must be numbers");
      }
      out(r, c) = row[c].get<double>();
    }
  }
  if (!all_finite(out)) {
    throw InvalidInputError("config: " + what + " has non-finite entries");
  }
  return out;
}

Vector parse_vector(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) {
    throw InvalidInputError("config: " + what + " must be a nonempty array");
  }
  Vector out(j.size());
  for (size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) {
      throw InvalidInputError("config: " + what + " entries must be numbers");
    }
    out(i) = j[i].get<double>();
  }
  return out;
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Digraph parse_graph(const json& j, int m, size_t graph_index) {
  const std::string what = "schedule.graphs[" + std::to_string(graph_index) + "]";
  if (!j.is_object() || !j.contains("arcs") || !j["arcs"].is_array()) {
    throw InvalidInputError("config: " + what + " needs an arcs array");
  }
  Digraph g(m);
  for (const json& arc : j["arcs"]) {
    if (!arc.is_array() || arc.size() != 2 || !arc[0].is_number_integer() ||
        !arc[1].is_number_integer()) {
      throw InvalidInputError("config: " + what + " arcs must be [from, to] agent labels");
    }
    const int from = arc[0].get<int>();
    const int to = arc[1].get<int>();
    if (from < 1 || from > m || to < 1 || to > m) {
      throw InvalidInputError("config: " + what + " arc label outside 1.." + std::to_string(m));
    }
    g.add_arc(from - 1, to - 1);
  }
  g.add_self_loops();
  return g;
}

GraphSchedule parse_schedule(const json& j, int m, uint64_t default_seed) {
  if (!j.is_object() || !j.contains("graphs") || !j["graphs"].is_array() ||
      j["graphs"].empty()) {
    throw InvalidInputError("config: schedule needs a nonempty graphs array");
  }
  std::vector<Digraph> graphs;
  graphs.reserve(j["graphs"].size());
  for (size_t k = 0; k < j["graphs"].size(); ++k) {
    graphs.push_back(parse_graph(j["graphs"][k], m, k));
  }

  if (!j.contains("signal")) return GraphSchedule::round_robin(std::move(graphs));

  const json& sig = j["signal"];
  if (!sig.is_object() || !sig.contains("mode") || !sig["mode"].is_string()) {
    throw InvalidInputError("config: schedule.signal needs a mode string");
  }
  const std::string mode = sig["mode"].get<std::string>();

  auto parse_indices = [&](const char* key) {
    std::vector<int> idx;
    if (!sig.contains(key) || !sig[key].is_array()) {
      throw InvalidInputError(std::string("config: schedule.signal needs a ") + key + " array");
    }
    for (const json& v : sig[key]) {
      if (!v.is_number_integer()) {
        throw InvalidInputError("config: schedule.signal indices must be integers");
      }
      idx.push_back(v.get<int>());
    }
    return idx;
  };

  if (mode == "periodic") {
    return GraphSchedule::periodic(std::move(graphs), parse_indices("sequence"));
  }
  if (mode == "sequence") {
    int def = 0;
    if (sig.contains("default")) {
      if (!sig["default"].is_number_integer()) {
        throw InvalidInputError("config: schedule.signal default must be an integer");
      }
      def = sig["default"].get<int>();
    }
    return GraphSchedule::sequence(std::move(graphs), parse_indices("sequence"), def);
  }
  if (mode == "random") {
    uint64_t seed = default_seed;
    if (sig.contains("seed")) {
      if (!sig["seed"].is_number_integer()) {
        throw InvalidInputError("config: schedule.signal seed must be an integer");
      }
      seed = sig["seed"].get<uint64_t>();
    }
    return GraphSchedule::random(std::move(graphs), seed);
  }
  throw InvalidInputError("config: unknown signal mode '" + mode +
                          "' (expected sequence, periodic or random)");
}

}  // namespace

ScenarioConfig parse_scenario_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInputError(std::string("config: JSON parse failed: ") + e.what());
  }
  if (!j.is_object()) throw InvalidInputError("config: top level must be an object");

  ScenarioConfig cfg;
  try {
    if (!j.contains("version") || !j["version"].is_number_integer()) {
      throw InvalidInputError("config: missing integer version field");
    }
    cfg.version = j["version"].get<int>();
    if (cfg.version != 1) {
      throw InvalidInputError("config: unsupported version " + std::to_string(cfg.version));
    }

    if (!j.contains("plant") || !j["plant"].is_object()) {
      throw InvalidInputError("config: missing plant object");
    }
    const json& pj = j["plant"];
    if (!pj.contains("A") || !pj.contains("C") || !pj["C"].is_array()) {
      throw InvalidInputError("config: plant needs A and a per-agent C array");
    }
    cfg.plant.A = parse_matrix(pj["A"], "plant.A");
    const int n = static_cast<int>(cfg.plant.A.rows());
    for (size_t i = 0; i < pj["C"].size(); ++i) {
      Matrix ci = parse_matrix(pj["C"][i], "plant.C[" + std::to_string(i) + "]");
      if (ci.cols() != n) {
        throw InvalidInputError("config: plant.C[" + std::to_string(i) +
                                "] must have n columns");
      }
      cfg.plant.C.push_back(std::move(ci));
    }
    if (pj.contains("n") && pj["n"].get<int>() != n) {
      throw InvalidInputError("config: plant.n disagrees with the A dimensions");
    }
    if (pj.contains("m") && pj["m"].get<size_t>() != cfg.plant.C.size()) {
      throw InvalidInputError("config: plant.m disagrees with the C list length");
    }
    cfg.plant.validate();

    if (!j.contains("lambda") || !j["lambda"].is_number()) {
      throw InvalidInputError("config: missing numeric lambda");
    }
    cfg.lambda = j["lambda"].get<double>();
    if (!(cfg.lambda > 0.0 && cfg.lambda < 1.0)) {
      throw InvalidInputError("config: lambda must lie strictly between 0 and 1");
    }

    if (j.contains("seed")) {
      if (!j["seed"].is_number_integer()) {
        throw InvalidInputError("config: seed must be an integer");
      }
      cfg.seed = j["seed"].get<uint64_t>();
    }

    if (!j.contains("schedule")) throw InvalidInputError("config: missing schedule");
    cfg.schedule = parse_schedule(j["schedule"], cfg.plant.m(), cfg.seed);

    if (j.contains("q_method")) {
      const std::string qm = j["q_method"].get<std::string>();
      if (qm == "weighted") {
        cfg.q_method = QMethod::Weighted;
      } else if (qm == "mixed") {
        cfg.q_method = QMethod::Mixed;
      } else if (qm == "explicit") {
        cfg.q_method = QMethod::Explicit;
      } else {
        throw InvalidInputError("config: unknown q_method '" + qm + "'");
      }
    }
    if (cfg.q_method == QMethod::Explicit) {
      if (!j.contains("q") || !j["q"].is_number_integer()) {
        throw InvalidInputError("config: q_method explicit needs an integer q");
      }
      cfg.explicit_q = j["q"].get<long>();
      if (cfg.explicit_q < 1) throw InvalidInputError("config: q must be at least 1");
    }

    if (j.contains("tau_max")) {
      if (!j["tau_max"].is_number_integer()) {
        throw InvalidInputError("config: tau_max must be an integer");
      }
      cfg.tau_max = j["tau_max"].get<long>();
      if (cfg.tau_max < 0) throw InvalidInputError("config: tau_max must be nonnegative");
    }

    if (j.contains("x0")) {
      Vector x0 = parse_vector(j["x0"], "x0");
      if (x0.size() != n) throw InvalidInputError("config: x0 must have dimension n");
      cfg.x0 = std::move(x0);
    }
    if (j.contains("x_hat0")) {
      if (!j["x_hat0"].is_array() || j["x_hat0"].size() != cfg.plant.C.size()) {
        throw InvalidInputError("config: x_hat0 must carry one vector per agent");
      }
      for (size_t i = 0; i < j["x_hat0"].size(); ++i) {
        Vector xh = parse_vector(j["x_hat0"][i], "x_hat0[" + std::to_string(i) + "]");
        if (xh.size() != n) {
          throw InvalidInputError("config: x_hat0 entries must have dimension n");
        }
        cfg.x_hat0.push_back(std::move(xh));
      }
    }
    if (j.contains("verbose")) cfg.verbose = j["verbose"].get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInputError(std::string("config: malformed field: ") + e.what());
  }
  return cfg;
}

ScenarioConfig load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IOError("config: cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario_json(ss.str());
}

std::string scenario_to_json(const ScenarioConfig& cfg) {
  json j;
  j["version"] = cfg.version;
  json pj;
  pj["n"] = cfg.plant.n();
  pj["m"] = cfg.plant.m();
  pj["A"] = matrix_to_json(cfg.plant.A);
  json cs = json::array();
  for (const Matrix& c : cfg.plant.C) cs.push_back(matrix_to_json(c));
  pj["C"] = std::move(cs);
  j["plant"] = std::move(pj);

  json sj;
  json graphs = json::array();
  for (int gid = 0; gid < cfg.schedule.graph_count(); ++gid) {
    json arcs = json::array();
    for (auto [from, to] : cfg.schedule.graph(gid).arcs()) {
      arcs.push_back(json::array({from + 1, to + 1}));
    }
    json g;
    g["arcs"] = std::move(arcs);
    graphs.push_back(std::move(g));
  }
  sj["graphs"] = std::move(graphs);
  json sig;
  switch (cfg.schedule.mode()) {
    case SignalMode::Sequence:
      sig["mode"] = "sequence";
      sig["sequence"] = cfg.schedule.signal_sequence();
      sig["default"] = cfg.schedule.default_index();
      break;
    case SignalMode::Periodic:
      sig["mode"] = "periodic";
      sig["sequence"] = cfg.schedule.signal_sequence();
      break;
    case SignalMode::Random:
      sig["mode"] = "random";
      sig["seed"] = cfg.schedule.seed();
      break;
  }
  sj["signal"] = std::move(sig);
  j["schedule"] = std::move(sj);

  j["lambda"] = cfg.lambda;
  j["q_method"] = q_method_name(cfg.q_method);
  if (cfg.q_method == QMethod::Explicit) j["q"] = cfg.explicit_q;
  j["tau_max"] = cfg.tau_max;
  j["seed"] = cfg.seed;
  if (cfg.x0.has_value()) {
    json x = json::array();
    for (Eigen::Index i = 0; i < cfg.x0->size(); ++i) x.push_back((*cfg.x0)(i));
    j["x0"] = std::move(x);
  }
  if (!cfg.x_hat0.empty()) {
    json xs = json::array();
    for (const Vector& xh : cfg.x_hat0) {
      json x = json::array();
      for (Eigen::Index i = 0; i < xh.size(); ++i) x.push_back(xh(i));
      xs.push_back(std::move(x));
    }
    j["x_hat0"] = std::move(xs);
  }
  if (cfg.verbose) j["verbose"] = true;
  return j.dump(2) + "\n";
}

Vector initial_state(const ScenarioConfig& cfg) {
  if (cfg.x0.has_value()) return *cfg.x0;
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int n = cfg.plant.n();
  Vector x(n);
  double norm = 0.0;
  do {
    for (int i = 0; i < n; ++i) x(i) = gauss(rng);
    norm = x.norm();
  } while (norm < 1e-12);
  return x / norm;
}

Digraph random_strongly_connected_graph(int m, std::mt19937_64& rng) {
  if (m < 1) throw InvalidInputError("random graph: vertex count must be positive");
  Digraph g(m);
  // A random Hamiltonian cycle guarantees strong connectivity; extra arcs
  // vary the in-degrees and break symmetry.
  std::vector<int> perm(m);
  for (int i = 0; i < m; ++i) perm[i] = i;
  for (int i = m - 1; i > 0; --i) {
    std::uniform_int_distribution<int> pick(0, i);
    std::swap(perm[i], perm[pick(rng)]);
  }
  for (int i = 0; i < m; ++i) g.add_arc(perm[i], perm[(i + 1) % m]);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  for (int u = 0; u < m; ++u) {
    for (int v = 0; v < m; ++v) {
      if (u != v && coin(rng) < 0.3) g.add_arc(u, v);
    }
  }
  g.add_self_loops();
  return g;
}

namespace {

Matrix random_orthogonal(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix g(n, n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) g(r, c) = gauss(rng);
  }
  Eigen::HouseholderQR<Matrix> qr(g);
  return qr.householderQ() * Matrix::Identity(n, n);
}

// Modal plant with per-agent mode subsets: every mode is owned by some
// agent, every agent misses at least one mode (nontrivial unobservable
// subspace), and an agent that ends up with no modes becomes a blind agent
// with a zero output row.
Plant modal_plant(int m, int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> jitter(-0.01, 0.01);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  Vector eigs(n);
  for (int k = 0; k < n; ++k) {
    const double mag =
        n == 1 ? 0.7 : 0.3 + 0.75 * static_cast<double>(k) / static_cast<double>(n - 1);
    eigs(k) = (coin(rng) < 0.5 ? -1.0 : 1.0) * (mag + jitter(rng));
  }
  const Matrix t = random_orthogonal(n, rng);
  Plant plant;
  plant.A = t * eigs.asDiagonal() * t.transpose();

  std::vector<std::vector<int>> modes(m);
  std::uniform_int_distribution<int> owner(0, m - 1);
  std::vector<std::vector<bool>> has(m, std::vector<bool>(n, false));
  for (int k = 0; k < n; ++k) {
    const int i = owner(rng);
    has[i][k] = true;
  }
  for (int i = 0; i < m; ++i) {
    for (int k = 0; k < n; ++k) {
      int count = 0;
      for (int kk = 0; kk < n; ++kk) count += has[i][kk] ? 1 : 0;
      if (!has[i][k] && count < n - 1 && coin(rng) < 0.25) has[i][k] = true;
    }
    for (int k = 0; k < n; ++k) {
      if (has[i][k]) modes[i].push_back(k);
    }
  }

  for (int i = 0; i < m; ++i) {
    if (modes[i].empty()) {
      plant.C.push_back(Matrix::Zero(1, n));
      continue;
    }
    Matrix c(modes[i].size(), n);
    for (size_t r = 0; r < modes[i].size(); ++r) c.row(r) = t.col(modes[i][r]).transpose();
    plant.C.push_back(std::move(c));
  }
  return plant;
}

Plant dense_plant(int m, int n, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> target(0.5, 1.05);
  Plant plant;
  plant.A.resize(n, n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) plant.A(r, c) = gauss(rng);
  }
  const double rho = spectral_radius(plant.A);
  if (rho > 1e-9) plant.A *= target(rng) / rho;
  for (int i = 0; i < m; ++i) {
    const int si = 1 + static_cast<int>(rng() % 2);
    Matrix c(si, n);
    for (int r = 0; r < si; ++r) {
      for (int cc = 0; cc < n; ++cc) c(r, cc) = gauss(rng);
    }
    plant.C.push_back(std::move(c));
  }
  return plant;
}

}  // namespace

ScenarioConfig make_random_scenario(const RandomScenarioSpec& spec) {
  if (spec.m < 2) throw InvalidInputError("random scenario: need at least two agents");
  if (spec.n < 1) throw InvalidInputError("random scenario: need at least one state");
  if (!(spec.lambda > 0.0 && spec.lambda < 1.0)) {
    throw InvalidInputError("random scenario: lambda must lie in (0, 1)");
  }
  if (spec.graph_count < 1) {
    throw InvalidInputError("random scenario: need at least one graph");
  }

  std::mt19937_64 rng(spec.seed);
  const bool dense = (spec.seed % 5) == 0;

  Plant plant;
  bool ok = false;
  for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
    plant = dense ? dense_plant(spec.m, spec.n, rng) : modal_plant(spec.m, spec.n, rng);
    ok = joint_observability(plant);
  }
  if (!ok) {
    throw InternalError("random scenario: failed to draw a jointly observable plant");
  }

  std::vector<Digraph> graphs;
  graphs.reserve(spec.graph_count);
  for (int k = 0; k < spec.graph_count; ++k) {
    graphs.push_back(random_strongly_connected_graph(spec.m, rng));
  }

  ScenarioConfig cfg;
  cfg.plant = std::move(plant);
  cfg.schedule = spec.graph_count == 1
                     ? GraphSchedule::constant(graphs[0])
                     : GraphSchedule::random(std::move(graphs), spec.seed ^ 0x517c3a9ULL);
  cfg.lambda = spec.lambda;
  cfg.q_method = spec.q_method;
  cfg.tau_max = spec.tau_max;
  cfg.seed = spec.seed;
  return cfg;
}

}  // namespace dobs
