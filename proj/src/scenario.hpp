#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "design.hpp"
#include "graph.hpp"
#include "plant.hpp"

namespace dobs {

// Parsed scenario configuration. Graph ids are 0-based indices into the
// declared graph list; agents are 1-based in the file format. Self-loops
// are implied by the format and added on load.
struct ScenarioConfig {
  int version = 1;
  Plant plant;
  GraphSchedule schedule = GraphSchedule::constant(Digraph::complete(2));
  double lambda = 0.8;
  QMethod q_method = QMethod::Weighted;
  long explicit_q = 1;  // only read when q_method is Explicit
  long tau_max = 50;
  uint64_t seed = 0;
  std::optional<Vector> x0;          // absent: seeded random unit vector
  std::vector<Vector> x_hat0;        // empty: zeros
  bool verbose = false;
};

ScenarioConfig parse_scenario_json(const std::string& text);
ScenarioConfig load_scenario_file(const std::string& path);
std::string scenario_to_json(const ScenarioConfig& cfg);

// The initial plant state the simulator will use: the configured x0 or a
// seeded random unit vector.
Vector initial_state(const ScenarioConfig& cfg);

// Seeded generator for randomized suites: a plant with eigenvalue magnitudes
// in [0.25, 1.05] (so mildly unstable plants appear), jointly observable
// per-agent outputs with nontrivial unobservable subspaces, and a set of
// random strongly connected communication graphs under a random switching
// signal.
struct RandomScenarioSpec {
  int m = 3;
  int n = 4;
  double lambda = 0.8;
  uint64_t seed = 1;
  int graph_count = 3;
  long tau_max = 50;
  QMethod q_method = QMethod::Weighted;
};

ScenarioConfig make_random_scenario(const RandomScenarioSpec& spec);

Digraph random_strongly_connected_graph(int m, std::mt19937_64& rng);

}  // namespace dobs
