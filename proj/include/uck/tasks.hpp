#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace uck {

enum class Task { Planning, Sat, Reachability };

std::string to_string(Task task);
Task task_from_string(const std::string& name);

// Node role ids per task:
//   planning:     0 free, 1 obstacle, 2 start, 3 goal
//   sat:          0 positive literal, 1 negative literal, 2 clause
//   reachability: 0 plain, 1 source, 2 target
std::size_t feature_width(Task task);

// One labeled benchmark example. Edges are stored as directed entries;
// undirected tasks store both directions.
struct GraphInstance {
  Task task = Task::Reachability;
  std::uint64_t seed = 0;
  std::size_t n_nodes = 0;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  std::vector<std::uint8_t> roles;
  std::optional<std::size_t> src;
  std::optional<std::size_t> tgt;
  int label = 0;

  std::vector<std::uint8_t> dense_adjacency() const;  // N×N row-major, {0,1}
  std::vector<double> feature_matrix() const;         // N×feature_width(task), one-hot roles
  void validate() const;

  nlohmann::json to_json() const;
  static GraphInstance from_json(const nlohmann::json& j);
};

struct TaskSpec {
  Task task = Task::Reachability;
  std::size_t size = 12;   // grid side / variable count / node count
  std::size_t count = 0;
  double balance = 0.5;    // target positive fraction
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  static TaskSpec from_json(const nlohmann::json& j);
};

// ---- exact oracles ------------------------------------------------------

struct GridCell {
  std::size_t row = 0;
  std::size_t col = 0;
  bool operator==(const GridCell&) const = default;
};

// 4-connected BFS over non-obstacle cells. Throws if start/goal sit on an
// obstacle (generation rejects such draws).
bool oracle_grid_feasible(const std::vector<std::uint8_t>& obstacle, std::size_t height,
                          std::size_t width, GridCell start, GridCell goal);

bool oracle_reachable(const std::vector<std::pair<std::uint32_t, std::uint32_t>>& edges,
                      std::size_t n, std::size_t src, std::size_t tgt);

// CNF over variables 1..num_vars; literals are signed indices. An empty
// clause makes the formula unsatisfiable; an empty formula is satisfiable.
struct CnfFormula {
  std::size_t num_vars = 0;
  std::vector<std::vector<int>> clauses;
};

// DPLL with unit propagation and pure-literal elimination.
bool oracle_sat(const CnfFormula& formula);

// ---- encoders -----------------------------------------------------------

GraphInstance encode_planning(const std::vector<std::uint8_t>& obstacle, std::size_t height,
                              std::size_t width, GridCell start, GridCell goal);
GraphInstance encode_sat(const CnfFormula& formula);
GraphInstance encode_reachability(const std::vector<std::pair<std::uint32_t, std::uint32_t>>& edges,
                                  std::size_t n, std::size_t src, std::size_t tgt);

// Rebuilds the formula from an encoded SAT graph using the negation and
// clause-membership edges; works for any node ordering.
CnfFormula decode_sat(const GraphInstance& instance);

// Recomputes the instance label with the matching oracle (BFS on the encoded
// graph for planning/reachability, decode + DPLL for SAT).
int oracle_label(const GraphInstance& instance);

// ---- generation ---------------------------------------------------------

GraphInstance sample_planning(std::size_t side, std::uint64_t seed);
GraphInstance sample_sat(std::size_t num_vars, std::uint64_t seed);
GraphInstance sample_reachability(std::size_t n, std::uint64_t seed);

// Deterministic in spec.seed: per-sample seeds come from a splitmix-derived
// sequence, and class balance is enforced by rejection against the oracle
// label. Throws NumericError when the rejection budget is exhausted.
std::vector<GraphInstance> generate_dataset(const TaskSpec& spec);

// ---- dataset files ------------------------------------------------------

struct Dataset {
  TaskSpec spec;
  std::vector<GraphInstance> instances;
};

// JSON-lines: a header record with the TaskSpec and format version, then one
// record per instance. Bytes are a pure function of the content.
void write_dataset(const std::string& path, const Dataset& dataset);
Dataset read_dataset(const std::string& path);

extern const char* kDatasetFormatName;
extern const int kDatasetFormatVersion;

}  // namespace uck
