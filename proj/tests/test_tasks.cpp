#include <doctest.h>

#include <fstream>
#include <set>

#include "test_support.hpp"
#include "uck/errors.hpp"
#include "uck/tasks.hpp"

using namespace uck;

namespace {

std::string file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::size_t undirected_degree(const GraphInstance& inst, std::uint32_t node) {
  std::set<std::uint32_t> neighbors;
  for (const auto& [a, b] : inst.edges) {
    if (a == node) neighbors.insert(b);
    if (b == node) neighbors.insert(a);
  }
  return neighbors.size();
}

}  // namespace

TEST_SUITE("tasks") {

TEST_CASE("grid oracle worked cases") {
  const std::vector<std::uint8_t> empty(9, 0);
  CHECK(oracle_grid_feasible(empty, 3, 3, {0, 0}, {2, 2}));
  CHECK(oracle_grid_feasible(empty, 3, 3, {1, 1}, {1, 1}));  // start == goal

  // Full wall column between start and goal.
  const std::vector<std::uint8_t> walled{0, 1, 0,  //
                                         0, 1, 0,  //
                                         0, 1, 0};
  CHECK_FALSE(oracle_grid_feasible(walled, 3, 3, {0, 0}, {0, 2}));

  const std::vector<std::uint8_t> blocked{0, 0, 0, 1, 0, 0, 0, 0, 0};
  CHECK_THROWS_AS(oracle_grid_feasible(blocked, 3, 3, {1, 0}, {0, 0}), std::invalid_argument);
}

TEST_CASE("reachability oracle worked cases") {
  using Edges = std::vector<std::pair<std::uint32_t, std::uint32_t>>;
  CHECK(oracle_reachable(Edges{}, 2, 1, 1));        // src == tgt
  CHECK_FALSE(oracle_reachable(Edges{}, 2, 0, 1));  // no edges
  const Edges chain{{0, 1}, {1, 2}};
  CHECK(oracle_reachable(chain, 3, 0, 2));
  CHECK_FALSE(oracle_reachable(chain, 3, 2, 0));
  CHECK(test::exhaustive_path_exists(chain, 3, 0, 2));
  CHECK_FALSE(test::exhaustive_path_exists(chain, 3, 2, 0));
}

TEST_CASE("sat oracle worked cases") {
  CHECK(oracle_sat(CnfFormula{0, {}}));                       // empty formula
  CHECK_FALSE(oracle_sat(CnfFormula{1, {{1}, {-1}}}));        // x and not-x
  CHECK_FALSE(oracle_sat(CnfFormula{2, {{1, 2}, {}}}));       // empty clause
  CHECK(oracle_sat(CnfFormula{2, {{1, 2}, {-1, 2}, {1, -2}}}));
  CHECK_THROWS_AS(oracle_sat(CnfFormula{1, {{2}}}), std::invalid_argument);
  CHECK_THROWS_AS(oracle_sat(CnfFormula{1, {{0}}}), std::invalid_argument);
}

TEST_CASE("dpll agrees with truth tables on 200 random small formulas") {
  Rng rng(101);
  for (int trial = 0; trial < 200; ++trial) {
    CnfFormula f;
    f.num_vars = 1 + rng.uniform_int(4);
    const std::size_t clauses = rng.uniform_int(10);
    for (std::size_t c = 0; c < clauses; ++c) {
      std::set<std::size_t> vars;
      const std::size_t k = 1 + rng.uniform_int(std::min<std::size_t>(3, f.num_vars));
      while (vars.size() < k) vars.insert(rng.uniform_int(f.num_vars) + 1);
      std::vector<int> clause;
      for (std::size_t v : vars) {
        clause.push_back(rng.bernoulli(0.5) ? static_cast<int>(v) : -static_cast<int>(v));
      }
      f.clauses.push_back(std::move(clause));
    }
    CHECK(oracle_sat(f) == test::truth_table_sat(f));
  }
}

TEST_CASE("bfs agrees with exhaustive path enumeration on 500 random graphs") {
  Rng rng(102);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 2 + rng.uniform_int(5);  // up to 6 nodes
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
    for (std::uint32_t i = 0; i < n; ++i) {
      for (std::uint32_t j = 0; j < n; ++j) {
        if (i != j && rng.bernoulli(0.3)) edges.emplace_back(i, j);
      }
    }
    const std::size_t src = rng.uniform_int(n);
    const std::size_t tgt = rng.uniform_int(n);
    CHECK(oracle_reachable(edges, n, src, tgt) == test::exhaustive_path_exists(edges, n, src, tgt));
  }
}

TEST_CASE("planning encoding") {
  const std::vector<std::uint8_t> empty(4, 0);
  GraphInstance inst = encode_planning(empty, 2, 2, {0, 0}, {1, 1});
  CHECK(inst.n_nodes == 4);
  CHECK(inst.edges.size() == 8);  // 4 undirected grid edges
  CHECK(inst.label == 1);
  CHECK(inst.roles[0] == 2);
  CHECK(inst.roles[3] == 3);
  CHECK(*inst.src == 0);
  CHECK(*inst.tgt == 3);

  const std::vector<std::uint8_t> obstacle{0, 1, 0, 0};
  GraphInstance blocked = encode_planning(obstacle, 2, 2, {0, 0}, {1, 1});
  CHECK(undirected_degree(blocked, 1) == 0);  // obstacle cell is isolated
  CHECK(blocked.roles[1] == 1);

  // Label is a graph property: recomputing it after a node relabeling of the
  // encoded instance gives the same answer.
  GraphInstance permuted = blocked;
  auto map_node = [](std::uint32_t v) { return 3 - v; };
  for (auto& [a, b] : permuted.edges) {
    a = map_node(a);
    b = map_node(b);
  }
  std::reverse(permuted.roles.begin(), permuted.roles.end());
  permuted.src = 3 - *blocked.src;
  permuted.tgt = 3 - *blocked.tgt;
  CHECK(oracle_label(permuted) == blocked.label);
}

TEST_CASE("sat encoding") {
  CnfFormula f;
  f.num_vars = 2;
  f.clauses = {{1, 2}};
  GraphInstance inst = encode_sat(f);
  CHECK(inst.n_nodes == 5);  // 4 literal nodes + 1 clause node
  CHECK(undirected_degree(inst, 4) == 2);
  CHECK_FALSE(inst.src.has_value());

  // Every literal node has exactly one negation partner.
  for (std::uint32_t v = 0; v < 2; ++v) {
    std::size_t negation_edges = 0;
    for (const auto& [a, b] : inst.edges) {
      if (a == 2 * v && b == 2 * v + 1) ++negation_edges;
    }
    CHECK(negation_edges == 1);
  }

  CnfFormula decoded = decode_sat(inst);
  CHECK(decoded.num_vars == 2);
  CHECK(oracle_sat(decoded) == (inst.label == 1));
}

TEST_CASE("reachability encoding") {
  const std::vector<std::pair<std::uint32_t, std::uint32_t>> chain{{0, 1}, {1, 2}};
  GraphInstance inst = encode_reachability(chain, 3, 0, 2);
  CHECK(inst.edges == chain);
  CHECK(inst.roles == std::vector<std::uint8_t>{1, 0, 2});
  CHECK(inst.label == 1);
  CHECK(oracle_label(inst) == 1);

  GraphInstance self = encode_reachability({}, 2, 1, 1);
  CHECK(self.label == 1);

  CHECK_THROWS_AS(encode_reachability(chain, 3, 0, 7), std::invalid_argument);
}

TEST_CASE("generate_dataset balance, sizes, and determinism") {
  TaskSpec spec;
  spec.task = Task::Reachability;
  spec.size = 8;
  spec.count = 1000;
  spec.seed = 5;
  auto data = generate_dataset(spec);
  REQUIRE(data.size() == 1000);
  std::size_t positives = 0;
  for (const auto& inst : data) positives += inst.label;
  const double fraction = static_cast<double>(positives) / 1000.0;
  CHECK(fraction >= 0.48);
  CHECK(fraction <= 0.52);

  TaskSpec planning;
  planning.task = Task::Planning;
  planning.size = 8;
  planning.count = 20;
  planning.seed = 2;
  for (const auto& inst : generate_dataset(planning)) CHECK(inst.n_nodes == 64);

  const std::string dir = test::scratch_dir("datasets");
  TaskSpec small = spec;
  small.count = 60;
  Dataset d1{small, generate_dataset(small)};
  write_dataset(dir + "/a.jsonl", d1);
  write_dataset(dir + "/b.jsonl", Dataset{small, generate_dataset(small)});
  CHECK(file_bytes(dir + "/a.jsonl") == file_bytes(dir + "/b.jsonl"));

  Dataset loaded = read_dataset(dir + "/a.jsonl");
  CHECK(loaded.spec.to_json() == small.to_json());
  REQUIRE(loaded.instances.size() == 60);
  for (std::size_t i = 0; i < 60; ++i) {
    CHECK(loaded.instances[i].to_json() == d1.instances[i].to_json());
  }
}

TEST_CASE("label integrity on 1000 instances per task") {
  struct Case {
    Task task;
    std::size_t size;
  };
  for (const Case c : {Case{Task::Planning, 5}, Case{Task::Sat, 6}, Case{Task::Reachability, 8}}) {
    TaskSpec spec;
    spec.task = c.task;
    spec.size = c.size;
    spec.count = 1000;
    spec.seed = 77;
    auto data = generate_dataset(spec);
    for (const auto& inst : data) {
      inst.validate();
      CHECK(oracle_label(inst) == inst.label);
    }
  }
}

TEST_CASE("dataset file errors") {
  const std::string dir = test::scratch_dir("dataset_errors");
  CHECK_THROWS_AS(read_dataset(dir + "/missing.jsonl"), IoError);

  std::ofstream bad(dir + "/bad.jsonl");
  bad << "{\"format\":\"something-else\",\"version\":1}\n";
  bad.close();
  CHECK_THROWS_AS(read_dataset(dir + "/bad.jsonl"), IoError);

  std::ofstream garbled(dir + "/garbled.jsonl");
  garbled << "not json\n";
  garbled.close();
  CHECK_THROWS_AS(read_dataset(dir + "/garbled.jsonl"), IoError);

  TaskSpec spec;
  spec.count = 0;
  CHECK_THROWS_AS(generate_dataset(spec), ConfigError);
}

}  // TEST_SUITE
