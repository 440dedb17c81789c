#include "uck/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>

#include "uck/errors.hpp"
#include "uck/rng.hpp"

namespace uck {

const char* kDatasetFormatName = "uck-dataset";
const int kDatasetFormatVersion = 1;

std::string to_string(Task task) {
  switch (task) {
    case Task::Planning: return "planning";
    case Task::Sat: return "sat";
    case Task::Reachability: return "reachability";
  }
  return "reachability";
}

Task task_from_string(const std::string& name) {
  if (name == "planning") return Task::Planning;
  if (name == "sat") return Task::Sat;
  if (name == "reachability") return Task::Reachability;
  throw ConfigError("unknown task: " + name);
}

std::size_t feature_width(Task task) { return task == Task::Planning ? 4 : 3; }

std::vector<std::uint8_t> GraphInstance::dense_adjacency() const {
  std::vector<std::uint8_t> adj(n_nodes * n_nodes, 0);
  for (const auto& [a, b] : edges) adj[a * n_nodes + b] = 1;
  return adj;
}

std::vector<double> GraphInstance::feature_matrix() const {
  const std::size_t width = feature_width(task);
  std::vector<double> features(n_nodes * width, 0.0);
  for (std::size_t i = 0; i < n_nodes; ++i) {
    if (roles[i] >= width) throw std::invalid_argument("feature_matrix: role id out of range");
    features[i * width + roles[i]] = 1.0;
  }
  return features;
}

void GraphInstance::validate() const {
  if (roles.size() != n_nodes) throw std::invalid_argument("instance: roles length != n_nodes");
  for (const auto& [a, b] : edges) {
    if (a >= n_nodes || b >= n_nodes) throw std::invalid_argument("instance: edge endpoint out of range");
  }
  if (label != 0 && label != 1) throw std::invalid_argument("instance: label must be 0 or 1");
  const bool endpoint_task = task != Task::Sat;
  if (endpoint_task && (!src || !tgt)) throw std::invalid_argument("instance: src/tgt required");
  if (!endpoint_task && (src || tgt)) throw std::invalid_argument("instance: sat carries no src/tgt");
  if (src && *src >= n_nodes) throw std::invalid_argument("instance: src out of range");
  if (tgt && *tgt >= n_nodes) throw std::invalid_argument("instance: tgt out of range");
  for (std::uint8_t r : roles) {
    if (r >= feature_width(task)) throw std::invalid_argument("instance: role id out of range");
  }
}

nlohmann::json GraphInstance::to_json() const {
  nlohmann::json j{{"task", uck::to_string(task)},
                   {"seed", seed},
                   {"n_nodes", n_nodes},
                   {"edges", edges},
                   {"roles", roles},
                   {"label", label}};
  j["src"] = src ? nlohmann::json(*src) : nlohmann::json(nullptr);
  j["tgt"] = tgt ? nlohmann::json(*tgt) : nlohmann::json(nullptr);
  return j;
}

GraphInstance GraphInstance::from_json(const nlohmann::json& j) {
  GraphInstance inst;
  inst.task = task_from_string(j.at("task"));
  inst.seed = j.at("seed");
  inst.n_nodes = j.at("n_nodes");
  inst.edges = j.at("edges").get<std::vector<std::pair<std::uint32_t, std::uint32_t>>>();
  inst.roles = j.at("roles").get<std::vector<std::uint8_t>>();
  inst.label = j.at("label");
  if (!j.at("src").is_null()) inst.src = j.at("src").get<std::size_t>();
  if (!j.at("tgt").is_null()) inst.tgt = j.at("tgt").get<std::size_t>();
  inst.validate();
  return inst;
}

nlohmann::json TaskSpec::to_json() const {
  return nlohmann::json{{"task", uck::to_string(task)},
                        {"size", size},
                        {"count", count},
                        {"balance", balance},
                        {"seed", seed}};
}

TaskSpec TaskSpec::from_json(const nlohmann::json& j) {
  TaskSpec spec;
  spec.task = task_from_string(j.at("task"));
  spec.size = j.at("size");
  spec.count = j.at("count");
  spec.balance = j.at("balance");
  spec.seed = j.at("seed");
  return spec;
}

// ---- oracles ------------------------------------------------------------

bool oracle_grid_feasible(const std::vector<std::uint8_t>& obstacle, std::size_t height,
                          std::size_t width, GridCell start, GridCell goal) {
  if (obstacle.size() != height * width) throw std::invalid_argument("grid oracle: size mismatch");
  auto at = [&](std::size_t r, std::size_t c) { return obstacle[r * width + c]; };
  if (start.row >= height || start.col >= width || goal.row >= height || goal.col >= width) {
    throw std::invalid_argument("grid oracle: cell out of range");
  }
  if (at(start.row, start.col) || at(goal.row, goal.col)) {
    throw std::invalid_argument("grid oracle: start/goal on an obstacle");
  }
  if (start == goal) return true;

  std::vector<std::uint8_t> seen(height * width, 0);
  std::deque<GridCell> queue{start};
  seen[start.row * width + start.col] = 1;
  while (!queue.empty()) {
    GridCell cell = queue.front();
    queue.pop_front();
    const long dr[4] = {-1, 1, 0, 0};
    const long dc[4] = {0, 0, -1, 1};
    for (int k = 0; k < 4; ++k) {
      const long r = static_cast<long>(cell.row) + dr[k];
      const long c = static_cast<long>(cell.col) + dc[k];
      if (r < 0 || c < 0 || r >= static_cast<long>(height) || c >= static_cast<long>(width)) continue;
      const std::size_t idx = static_cast<std::size_t>(r) * width + static_cast<std::size_t>(c);
      if (seen[idx] || obstacle[idx]) continue;
      if (GridCell{static_cast<std::size_t>(r), static_cast<std::size_t>(c)} == goal) return true;
      seen[idx] = 1;
      queue.push_back({static_cast<std::size_t>(r), static_cast<std::size_t>(c)});
    }
  }
  return false;
}

bool oracle_reachable(const std::vector<std::pair<std::uint32_t, std::uint32_t>>& edges,
                      std::size_t n, std::size_t src, std::size_t tgt) {
  if (src >= n || tgt >= n) throw std::invalid_argument("reachability oracle: index out of range");
  if (src == tgt) return true;
  std::vector<std::vector<std::uint32_t>> out(n);
  for (const auto& [a, b] : edges) {
    if (a >= n || b >= n) throw std::invalid_argument("reachability oracle: edge out of range");
    out[a].push_back(b);
  }
  std::vector<std::uint8_t> seen(n, 0);
  std::deque<std::uint32_t> queue{static_cast<std::uint32_t>(src)};
  seen[src] = 1;
  while (!queue.empty()) {
    const std::uint32_t u = queue.front();
    queue.pop_front();
    for (std::uint32_t v : out[u]) {
      if (v == tgt) return true;
      if (!seen[v]) {
        seen[v] = 1;
        queue.push_back(v);
      }
    }
  }
  return false;
}

namespace {

// Assignment values: 0 unassigned, 1 true, -1 false.
int literal_value(int lit, const std::vector<int>& assign) {
  const int v = assign[static_cast<std::size_t>(std::abs(lit))];
  if (v == 0) return 0;
  return (lit > 0) == (v > 0) ? 1 : -1;
}

bool dpll(const std::vector<std::vector<int>>& clauses, std::vector<int>& assign) {
  // Unit propagation and pure-literal elimination to a fixed point.
  while (true) {
    bool changed = false;

    std::vector<int> polarity(assign.size(), 0);  // bit 1: positive seen, bit 2: negative
    bool all_satisfied = true;
    for (const auto& clause : clauses) {
      bool satisfied = false;
      int unassigned_count = 0;
      int last_unassigned = 0;
      for (int lit : clause) {
        const int val = literal_value(lit, assign);
        if (val == 1) {
          satisfied = true;
          break;
        }
        if (val == 0) {
          ++unassigned_count;
          last_unassigned = lit;
        }
      }
      if (satisfied) continue;
      all_satisfied = false;
      if (unassigned_count == 0) return false;  // conflict
      if (unassigned_count == 1) {
        assign[static_cast<std::size_t>(std::abs(last_unassigned))] = last_unassigned > 0 ? 1 : -1;
        changed = true;
        break;  // restart scan with the new assignment
      }
      for (int lit : clause) {
        if (literal_value(lit, assign) == 0) {
          polarity[static_cast<std::size_t>(std::abs(lit))] |= lit > 0 ? 1 : 2;
        }
      }
    }
    if (all_satisfied) return true;
    if (changed) continue;

    for (std::size_t v = 1; v < assign.size(); ++v) {
      if (assign[v] == 0 && (polarity[v] == 1 || polarity[v] == 2)) {
        assign[v] = polarity[v] == 1 ? 1 : -1;
        changed = true;
      }
    }
    if (!changed) break;
  }

  // Branch on the first unassigned variable.
  std::size_t branch = 0;
  for (std::size_t v = 1; v < assign.size(); ++v) {
    if (assign[v] == 0) {
      branch = v;
      break;
    }
  }
  if (branch == 0) {
    // Everything assigned; accept only if no clause is violated.
    for (const auto& clause : clauses) {
      bool satisfied = false;
      for (int lit : clause) {
        if (literal_value(lit, assign) == 1) {
          satisfied = true;
          break;
        }
      }
      if (!satisfied) return false;
    }
    return true;
  }

  for (int choice : {1, -1}) {
    std::vector<int> saved = assign;
    assign[branch] = choice;
    if (dpll(clauses, assign)) return true;
    assign = saved;
  }
  return false;
}

}  // namespace

bool oracle_sat(const CnfFormula& formula) {
  for (const auto& clause : formula.clauses) {
    if (clause.empty()) return false;
    for (int lit : clause) {
      if (lit == 0 || static_cast<std::size_t>(std::abs(lit)) > formula.num_vars) {
        throw std::invalid_argument("sat oracle: literal index out of range");
      }
    }
  }
  if (formula.clauses.empty()) return true;
  std::vector<int> assign(formula.num_vars + 1, 0);
  return dpll(formula.clauses, assign);
}

// ---- encoders -------------------------------------------------------------

namespace {

void add_undirected(std::vector<std::pair<std::uint32_t, std::uint32_t>>& edges, std::uint32_t a,
                    std::uint32_t b) {
  edges.emplace_back(a, b);
  edges.emplace_back(b, a);
}

}  // namespace

GraphInstance encode_planning(const std::vector<std::uint8_t>& obstacle, std::size_t height,
                              std::size_t width, GridCell start, GridCell goal) {
  const bool feasible = oracle_grid_feasible(obstacle, height, width, start, goal);

  GraphInstance inst;
  inst.task = Task::Planning;
  inst.n_nodes = height * width;
  inst.roles.assign(inst.n_nodes, 0);
  auto node = [&](std::size_t r, std::size_t c) { return static_cast<std::uint32_t>(r * width + c); };
  for (std::size_t i = 0; i < inst.n_nodes; ++i) {
    if (obstacle[i]) inst.roles[i] = 1;
  }
  inst.roles[node(start.row, start.col)] = 2;
  inst.roles[node(goal.row, goal.col)] = 3;

  // Undirected grid edges between 4-adjacent non-obstacle cells; obstacle
  // cells stay isolated.
  for (std::size_t r = 0; r < height; ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      if (obstacle[r * width + c]) continue;
      if (c + 1 < width && !obstacle[r * width + c + 1]) add_undirected(inst.edges, node(r, c), node(r, c + 1));
      if (r + 1 < height && !obstacle[(r + 1) * width + c]) add_undirected(inst.edges, node(r, c), node(r + 1, c));
    }
  }
  inst.src = node(start.row, start.col);
  inst.tgt = node(goal.row, goal.col);
  inst.label = feasible ? 1 : 0;
  return inst;
}

GraphInstance encode_sat(const CnfFormula& formula) {
  const std::size_t v = formula.num_vars;
  GraphInstance inst;
  inst.task = Task::Sat;
  inst.n_nodes = 2 * v + formula.clauses.size();
  inst.roles.assign(inst.n_nodes, 2);
  for (std::size_t i = 0; i < v; ++i) {
    inst.roles[2 * i] = 0;      // positive literal of variable i+1
    inst.roles[2 * i + 1] = 1;  // negative literal
    add_undirected(inst.edges, static_cast<std::uint32_t>(2 * i), static_cast<std::uint32_t>(2 * i + 1));
  }
  std::set<std::pair<std::uint32_t, std::uint32_t>> clause_edges;
  for (std::size_t c = 0; c < formula.clauses.size(); ++c) {
    const auto clause_node = static_cast<std::uint32_t>(2 * v + c);
    for (int lit : formula.clauses[c]) {
      if (lit == 0 || static_cast<std::size_t>(std::abs(lit)) > v) {
        throw std::invalid_argument("encode_sat: literal index out of range");
      }
      const std::size_t var = static_cast<std::size_t>(std::abs(lit)) - 1;
      const auto lit_node = static_cast<std::uint32_t>(2 * var + (lit > 0 ? 0 : 1));
      clause_edges.insert({lit_node, clause_node});  // dedupes repeated literals
    }
  }
  for (const auto& [lit_node, clause_node] : clause_edges) {
    add_undirected(inst.edges, lit_node, clause_node);
  }
  inst.label = oracle_sat(formula) ? 1 : 0;
  return inst;
}

GraphInstance encode_reachability(const std::vector<std::pair<std::uint32_t, std::uint32_t>>& edges,
                                  std::size_t n, std::size_t src, std::size_t tgt) {
  if (src >= n || tgt >= n) throw std::invalid_argument("encode_reachability: index out of range");
  GraphInstance inst;
  inst.task = Task::Reachability;
  inst.n_nodes = n;
  inst.edges = edges;
  inst.roles.assign(n, 0);
  inst.roles[src] = 1;
  inst.roles[tgt] = 2;  // src==tgt keeps the target role; oracle still says reachable
  inst.src = src;
  inst.tgt = tgt;
  inst.label = oracle_reachable(edges, n, src, tgt) ? 1 : 0;
  return inst;
}

CnfFormula decode_sat(const GraphInstance& instance) {
  if (instance.task != Task::Sat) throw std::invalid_argument("decode_sat: not a sat instance");

  // Pair positive/negative literal nodes through their negation edge, then
  // read clause membership off literal-clause edges.
  std::map<std::uint32_t, std::uint32_t> negation;  // positive node -> negative node
  for (const auto& [a, b] : instance.edges) {
    if (instance.roles[a] == 0 && instance.roles[b] == 1) negation[a] = b;
  }
  CnfFormula formula;
  formula.num_vars = negation.size();
  std::map<std::uint32_t, int> literal_of_node;
  int var = 1;
  for (const auto& [pos, neg] : negation) {
    literal_of_node[pos] = var;
    literal_of_node[neg] = -var;
    ++var;
  }

  std::map<std::uint32_t, std::set<int>> clause_lits;
  for (std::size_t i = 0; i < instance.n_nodes; ++i) {
    if (instance.roles[i] == 2) clause_lits[static_cast<std::uint32_t>(i)] = {};
  }
  for (const auto& [a, b] : instance.edges) {
    if (instance.roles[b] == 2 && instance.roles[a] != 2) {
      clause_lits[b].insert(literal_of_node.at(a));
    }
  }
  for (const auto& [node, lits] : clause_lits) {
    formula.clauses.emplace_back(lits.begin(), lits.end());
  }
  return formula;
}

int oracle_label(const GraphInstance& instance) {
  if (instance.task == Task::Sat) return oracle_sat(decode_sat(instance)) ? 1 : 0;
  return oracle_reachable(instance.edges, instance.n_nodes, *instance.src, *instance.tgt) ? 1 : 0;
}

// ---- samplers -------------------------------------------------------------

GraphInstance sample_planning(std::size_t side, std::uint64_t seed) {
  Rng rng(seed);
  const double density = rng.uniform(0.20, 0.40);
  std::vector<std::uint8_t> obstacle(side * side);
  std::vector<std::size_t> free_cells;
  while (true) {
    free_cells.clear();
    for (std::size_t i = 0; i < obstacle.size(); ++i) {
      obstacle[i] = rng.bernoulli(density) ? 1 : 0;
      if (!obstacle[i]) free_cells.push_back(i);
    }
    if (free_cells.size() >= 2) break;
  }
  const std::size_t start = free_cells[rng.uniform_int(free_cells.size())];
  const std::size_t goal = free_cells[rng.uniform_int(free_cells.size())];
  GraphInstance inst = encode_planning(obstacle, side, side, {start / side, start % side},
                                       {goal / side, goal % side});
  inst.seed = seed;
  return inst;
}

GraphInstance sample_sat(std::size_t num_vars, std::uint64_t seed) {
  Rng rng(seed);
  const double ratio = rng.uniform(3.8, 4.8);  // near the 3-SAT phase transition
  const auto num_clauses = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(num_vars)));
  const std::size_t k = std::min<std::size_t>(3, num_vars);

  CnfFormula formula;
  formula.num_vars = num_vars;
  for (std::size_t c = 0; c < num_clauses; ++c) {
    std::set<std::size_t> vars;
    while (vars.size() < k) vars.insert(rng.uniform_int(num_vars) + 1);
    std::vector<int> clause;
    for (std::size_t v : vars) clause.push_back(rng.bernoulli(0.5) ? static_cast<int>(v) : -static_cast<int>(v));
    formula.clauses.push_back(std::move(clause));
  }
  GraphInstance inst = encode_sat(formula);
  inst.seed = seed;
  return inst;
}

GraphInstance sample_reachability(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  const double mean_degree = rng.uniform(1.0, 2.0);
  const double p = mean_degree / static_cast<double>(n);
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  for (std::uint32_t i = 0; i < n; ++i) {
    for (std::uint32_t j = 0; j < n; ++j) {
      if (i != j && rng.bernoulli(p)) edges.emplace_back(i, j);
    }
  }
  const std::size_t src = rng.uniform_int(n);
  std::size_t tgt = rng.uniform_int(n - 1);
  if (tgt >= src) ++tgt;  // src != tgt
  GraphInstance inst = encode_reachability(edges, n, src, tgt);
  inst.seed = seed;
  return inst;
}

// ---- dataset generation ----------------------------------------------------

std::vector<GraphInstance> generate_dataset(const TaskSpec& spec) {
  if (spec.count == 0) throw ConfigError("generate_dataset: count must be positive");
  if (spec.balance < 0.0 || spec.balance > 1.0) {
    throw ConfigError("generate_dataset: balance must be in [0, 1]");
  }
  if (spec.task == Task::Planning && spec.size < 2) {
    throw ConfigError("generate_dataset: planning grids need side >= 2");
  }
  if (spec.task == Task::Reachability && spec.size < 2) {
    throw ConfigError("generate_dataset: reachability graphs need >= 2 nodes");
  }
  if (spec.task == Task::Sat && spec.size < 1) {
    throw ConfigError("generate_dataset: sat needs >= 1 variable");
  }

  auto sample = [&](std::uint64_t seed) {
    switch (spec.task) {
      case Task::Planning: return sample_planning(spec.size, seed);
      case Task::Sat: return sample_sat(spec.size, seed);
      case Task::Reachability: return sample_reachability(spec.size, seed);
    }
    return sample_reachability(spec.size, seed);
  };

  auto remaining_pos = static_cast<std::size_t>(std::llround(spec.balance * static_cast<double>(spec.count)));
  std::size_t remaining_neg = spec.count - remaining_pos;
  constexpr std::size_t kMaxAttempts = 20000;

  std::vector<GraphInstance> out;
  out.reserve(spec.count);
  for (std::size_t i = 0; i < spec.count; ++i) {
    const std::uint64_t sample_seed = Rng::derive(spec.seed, i);
    bool accepted = false;
    for (std::size_t attempt = 0; attempt < kMaxAttempts; ++attempt) {
      GraphInstance inst = sample(Rng::derive(sample_seed, attempt));
      std::size_t& remaining = inst.label == 1 ? remaining_pos : remaining_neg;
      if (remaining == 0) continue;
      --remaining;
      out.push_back(std::move(inst));
      accepted = true;
      break;
    }
    if (!accepted) {
      throw NumericError("generate_dataset: rejection budget exceeded while balancing classes (task=" +
                         uck::to_string(spec.task) + ", size=" + std::to_string(spec.size) + ")");
    }
  }
  return out;
}

// ---- dataset files ----------------------------------------------------------

void write_dataset(const std::string& path, const Dataset& dataset) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  nlohmann::json header{{"format", kDatasetFormatName},
                        {"version", kDatasetFormatVersion},
                        {"spec", dataset.spec.to_json()}};
  out << header.dump() << '\n';
  for (const auto& inst : dataset.instances) out << inst.to_json().dump() << '\n';
  if (!out) throw IoError("write failed: " + path);
}

Dataset read_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset: " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("dataset is empty: " + path);

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("dataset header is not valid json: " + path + " (" + e.what() + ")");
  }
  if (header.value("format", "") != kDatasetFormatName) {
    throw IoError("not a " + std::string(kDatasetFormatName) + " file: " + path);
  }
  if (header.value("version", -1) != kDatasetFormatVersion) {
    throw IoError("unsupported dataset version in " + path);
  }

  Dataset dataset;
  dataset.spec = TaskSpec::from_json(header.at("spec"));
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      dataset.instances.push_back(GraphInstance::from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw IoError(path + ":" + std::to_string(line_no) + ": bad record: " + e.what());
    }
  }
  return dataset;
}

}  // namespace uck
