// Acceptance suite: one criterion per command-line argument, all when none
// are given. Prints exactly one [PASS]/[FAIL] line per criterion and exits
// nonzero if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "uck/checkpoint.hpp"
#include "uck/eval.hpp"
#include "uck/model.hpp"
#include "uck/sparse_projection.hpp"
#include "uck/tasks.hpp"
#include "uck/train.hpp"

using namespace uck;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

double median3(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

// Shared desk-scale planning configuration for the ablation and phi-semantics
// criteria (8x8 training, 12x12 generalization).
struct PlanningDesk {
  std::size_t d_model = 32;
  std::size_t d_rule = 32;
  std::size_t rules = 8;
  std::size_t steps = 4;
  std::size_t train_count = 600;
  std::size_t eval_count = 400;
  std::size_t epochs = 12;
  std::size_t batch = 32;
  double lr = 1e-3;

  AblationGridConfig grid(const std::vector<std::uint64_t>& seeds) const {
    AblationGridConfig g;
    g.base_model.d_model = d_model;
    g.base_model.d_rule = d_rule;
    g.base_model.num_rules = rules;
    g.base_model.rollout_steps = steps;
    g.base_model.in_features = feature_width(Task::Planning);
    g.base_model.head = HeadKind::Endpoint;
    g.base_train.epochs = epochs;
    g.base_train.batch_size = batch;
    g.base_train.learning_rate = lr;
    g.train_spec.task = Task::Planning;
    g.train_spec.size = 8;
    g.train_spec.count = train_count;
    g.seeds = seeds;
    return g;
  }

  std::vector<GraphInstance> split(std::size_t size, std::uint64_t seed) const {
    TaskSpec spec;
    spec.task = Task::Planning;
    spec.size = size;
    spec.count = eval_count;
    spec.seed = seed;
    return generate_dataset(spec);
  }
};

// ---------------------------------------------------------------------------

bool criterion_sparsemax(std::ostream& out) {
  const auto start = Clock::now();
  Rng rng(20240801);
  std::size_t jvp_checked = 0;

  for (int trial = 0; trial < 1200; ++trial) {
    const std::size_t n = 1 + rng.uniform_int(32);
    std::vector<double> z(n);
    for (auto& v : z) v = rng.uniform(-10, 10);
    SparsemaxResult r = sparsemax_forward(z);

    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (r.p[i] < 0.0) {
        out << "negative probability";
        return false;
      }
      sum += r.p[i];
      const bool in_support = std::find(r.support.begin(), r.support.end(), i) != r.support.end();
      if (!in_support && r.p[i] != 0.0) {
        out << "off-support entry not exactly zero";
        return false;
      }
    }
    if (std::abs(sum - 1.0) > 1e-12) {
      out << "sum deviates by " << std::abs(sum - 1.0);
      return false;
    }

    // Bitwise shift invariance on representable inputs.
    std::vector<double> grid_z(n), shifted(n);
    const double c = static_cast<double>(static_cast<int>(rng.uniform_int(9)) - 4);
    for (std::size_t i = 0; i < n; ++i) {
      grid_z[i] = static_cast<double>(static_cast<int>(rng.uniform_int(257)) - 128) / 16.0;
      shifted[i] = grid_z[i] + c;
    }
    if (sparsemax_forward(grid_z).p != sparsemax_forward(shifted).p) {
      out << "shift invariance violated";
      return false;
    }

    // Idempotence on dyadic simplex points (exact arithmetic end to end).
    std::vector<double> simplex(n, 0.0);
    std::size_t left = 64;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const std::size_t take = rng.uniform_int(left + 1);
      simplex[i] = static_cast<double>(take) / 64.0;
      left -= take;
    }
    simplex[n - 1] = static_cast<double>(left) / 64.0;
    if (sparsemax_forward(simplex).p != simplex) {
      out << "idempotence violated";
      return false;
    }

    // JVP against central differences away from support boundaries.
    if (n >= 2) {
      std::vector<double> zs(n);
      for (auto& v : zs) v = rng.uniform(-2, 2);
      SparsemaxResult rs = sparsemax_forward(zs);
      double margin = 1e300;
      for (double v : zs) margin = std::min(margin, std::abs(v - rs.tau));
      if (margin < 1e-4) continue;
      std::vector<double> upstream(n);
      for (auto& v : upstream) v = rng.uniform(-1, 1);
      std::vector<double> analytic = sparsemax_jvp(rs.p, rs.support, upstream);
      const double step = 1e-7;
      double worst = 0.0, scale = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> plus = zs, minus = zs;
        plus[i] += step;
        minus[i] -= step;
        const auto rp = sparsemax_forward(plus);
        const auto rm = sparsemax_forward(minus);
        double directional = 0.0;  // d<upstream, p>/dz_i
        for (std::size_t j = 0; j < n; ++j) {
          directional += upstream[j] * (rp.p[j] - rm.p[j]) / (2.0 * step);
        }
        worst = std::max(worst, std::abs(directional - analytic[i]));
        scale = std::max({scale, std::abs(directional), std::abs(analytic[i])});
      }
      if (worst / (scale + 1e-10) > 1e-6) {
        out << "jvp mismatch " << worst / (scale + 1e-10);
        return false;
      }
      ++jvp_checked;
    }
  }

  const double elapsed = seconds_since(start);
  out << "1200 randomized cases, " << jvp_checked << " jvp checks, " << elapsed << "s";
  return elapsed < 10.0;
}

// ---------------------------------------------------------------------------

bool criterion_oracles(std::ostream& out) {
  const auto start = Clock::now();

  Rng rng(77001);
  for (int trial = 0; trial < 200; ++trial) {
    CnfFormula f;
    f.num_vars = 1 + rng.uniform_int(4);
    const std::size_t clauses = rng.uniform_int(12);
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
    // Truth-table reference.
    bool table_sat = f.clauses.empty();
    for (std::uint64_t mask = 0; mask < (1ULL << f.num_vars) && !table_sat; ++mask) {
      bool all = true;
      for (const auto& clause : f.clauses) {
        bool ok = false;
        for (int lit : clause) {
          const bool value = (mask >> (std::abs(lit) - 1)) & 1;
          if ((lit > 0) == value) {
            ok = true;
            break;
          }
        }
        if (!ok) {
          all = false;
          break;
        }
      }
      table_sat = all;
    }
    if (oracle_sat(f) != table_sat) {
      out << "dpll/truth-table disagreement at trial " << trial;
      return false;
    }
  }

  Rng grng(77002);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 2 + grng.uniform_int(5);
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
    for (std::uint32_t i = 0; i < n; ++i) {
      for (std::uint32_t j = 0; j < n; ++j) {
        if (i != j && grng.bernoulli(0.3)) edges.emplace_back(i, j);
      }
    }
    const std::size_t src = grng.uniform_int(n), tgt = grng.uniform_int(n);
    // Exhaustive simple-path enumeration.
    std::vector<std::vector<std::size_t>> adjacency(n);
    for (const auto& [a, b] : edges) adjacency[a].push_back(b);
    std::vector<std::uint8_t> visited(n, 0);
    std::function<bool(std::size_t)> dfs = [&](std::size_t at) {
      if (at == tgt) return true;
      for (std::size_t next : adjacency[at]) {
        if (visited[next]) continue;
        visited[next] = 1;
        if (dfs(next)) return true;
        visited[next] = 0;
      }
      return false;
    };
    visited[src] = 1;
    if (oracle_reachable(edges, n, src, tgt) != dfs(src)) {
      out << "bfs/enumeration disagreement at trial " << trial;
      return false;
    }
  }

  // 20 hand-built grids, trivial and walled.
  struct GridCase {
    std::size_t h, w;
    std::vector<std::uint8_t> cells;
    GridCell start, goal;
    bool feasible;
  };
  const std::vector<GridCase> grids = {
      {1, 1, {0}, {0, 0}, {0, 0}, true},
      {2, 2, {0, 0, 0, 0}, {0, 0}, {1, 1}, true},
      {2, 2, {0, 1, 1, 0}, {0, 0}, {1, 1}, false},
      {3, 3, std::vector<std::uint8_t>(9, 0), {0, 0}, {2, 2}, true},
      {3, 3, {0, 1, 0, 0, 1, 0, 0, 0, 0}, {0, 0}, {0, 2}, true},   // gap at bottom
      {3, 3, {0, 1, 0, 0, 1, 0, 0, 1, 0}, {0, 0}, {0, 2}, false},  // full wall
      {3, 3, std::vector<std::uint8_t>(9, 0), {1, 1}, {1, 1}, true},
      {4, 4, {0, 0, 0, 0, 1, 1, 1, 0, 0, 0, 0, 0, 0, 1, 1, 1}, {0, 0}, {3, 0}, true},  // snake
      {4, 4, {0, 0, 0, 0, 0, 1, 1, 1, 0, 1, 0, 0, 0, 1, 0, 0}, {0, 0}, {2, 2}, false},  // boxed
      {5, 5, std::vector<std::uint8_t>(25, 0), {0, 0}, {4, 4}, true},
      {5, 5, {0, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0},
       {0, 0}, {4, 4}, true},  // leaky anti-diagonal
      {5, 5, {0, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 0},
       {0, 0}, {4, 4}, false},  // full anti-diagonal
      {1, 5, {0, 0, 0, 0, 0}, {0, 0}, {0, 4}, true},
      {1, 5, {0, 0, 1, 0, 0}, {0, 0}, {0, 4}, false},
      {2, 3, {0, 0, 0, 0, 0, 0}, {0, 0}, {1, 2}, true},
      {3, 3, {0, 0, 0, 0, 1, 0, 0, 0, 0}, {0, 0}, {2, 2}, true},  // around the center
      {4, 1, {0, 0, 0, 0}, {0, 0}, {3, 0}, true},
      {3, 4, {0, 0, 0, 0, 1, 1, 1, 0, 0, 0, 0, 0}, {0, 0}, {2, 3}, true},   // gap right
      {3, 4, {0, 0, 0, 0, 1, 1, 1, 1, 0, 0, 0, 0}, {0, 0}, {2, 3}, false},  // full row
      {2, 2, {0, 1, 1, 1}, {0, 0}, {0, 0}, true},
  };
  for (std::size_t i = 0; i < grids.size(); ++i) {
    const auto& g = grids[i];
    if (oracle_grid_feasible(g.cells, g.h, g.w, g.start, g.goal) != g.feasible) {
      out << "grid case " << i << " wrong";
      return false;
    }
  }

  const double elapsed = seconds_since(start);
  out << "200 formulas, 500 graphs, " << grids.size() << " grids, " << elapsed << "s";
  return elapsed < 30.0;
}

// ---------------------------------------------------------------------------

bool criterion_gradient(std::ostream& out) {
  const auto start = Clock::now();

  ModelConfig cfg;
  cfg.d_model = 8;
  cfg.d_rule = 8;
  cfg.num_rules = 3;
  cfg.rollout_steps = 2;
  cfg.dropout = 0.0;
  cfg.in_features = feature_width(Task::Reachability);
  cfg.head = HeadKind::Endpoint;
  cfg.seed = 4242;
  Model model = Model::init(cfg);

  GraphInstance inst = sample_reachability(5, 991);
  const ForwardCtx ctx{false, nullptr};
  auto make_loss = [&] { return cross_entropy(model.forward(inst, ctx).logits, inst.label); };

  GradMap grads = backward(make_loss());
  double worst_group = 0.0;
  std::string worst_name;
  for (auto& [name, leaf] : model.parameters()) {
    std::vector<double> numeric(leaf->size());
    {
      NoGradGuard no_grad;
      for (std::size_t i = 0; i < leaf->size(); ++i) {
        const double saved = leaf->data()[i];
        leaf->data()[i] = saved + 1e-5;
        const double up = make_loss().value();
        leaf->data()[i] = saved - 1e-5;
        const double down = make_loss().value();
        leaf->data()[i] = saved;
        numeric[i] = (up - down) / 2e-5;
      }
    }
    const std::vector<double> analytic = grads.grad(*leaf).data();
    double max_diff = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < numeric.size(); ++i) {
      max_diff = std::max(max_diff, std::abs(analytic[i] - numeric[i]));
      scale = std::max({scale, std::abs(analytic[i]), std::abs(numeric[i])});
    }
    const double rel = max_diff / (scale + 1e-10);
    if (rel > worst_group) {
      worst_group = rel;
      worst_name = name;
    }
  }

  const double elapsed = seconds_since(start);
  out << "worst group " << worst_name << " rel err " << worst_group << ", " << elapsed << "s";
  return worst_group < 1e-3 && elapsed < 120.0;
}

// ---------------------------------------------------------------------------

bool criterion_state_bounds(std::ostream& out) {
  TaskSpec spec;
  spec.task = Task::Reachability;
  spec.size = 10;
  spec.count = 64;
  spec.seed = 31337;
  auto data = generate_dataset(spec);

  ModelConfig mc;  // full-size default architecture
  mc.in_features = feature_width(Task::Reachability);
  mc.head = HeadKind::Endpoint;
  mc.seed = 7;
  Model model = Model::init(mc);

  TrainConfig tc;
  tc.batch_size = 16;
  tc.epochs = 25;  // 4 batches/epoch -> exactly 100 optimizer steps
  tc.seed = 7;
  train(model, data, tc);

  const ForwardCtx ctx{false, nullptr};
  NoGradGuard no_grad;
  double max_phi = 0.0, max_phi_global = 0.0;
  for (const auto& inst : data) {
    ForwardOutput fwd = model.forward(inst, ctx);
    for (double v : fwd.diagnostics.final_phi) max_phi = std::max(max_phi, std::abs(v));
    max_phi_global = std::max(max_phi_global, std::abs(fwd.diagnostics.final_phi_global));
  }
  out << "100 optimizer steps; max|phi| " << max_phi << " (cap 6), max|Phi| " << max_phi_global
      << " (cap " << mc.rollout_steps << ")";
  return max_phi <= 6.0 && max_phi_global <= static_cast<double>(mc.rollout_steps);
}

// ---------------------------------------------------------------------------

bool criterion_metrics(std::ostream& out) {
  const double planning_full = balance_score(0.999, 0.948);
  const double planning_no_dsp = balance_score(0.201, 0.993);
  out << "balance(99.9, 94.8) = " << planning_full << ", balance(20.1, 99.3) = " << planning_no_dsp;
  return std::abs(planning_full - 0.949) <= 0.001 && std::abs(planning_no_dsp - 0.203) <= 0.001;
}

// ---------------------------------------------------------------------------

bool criterion_learning(std::ostream& out) {
  const auto start = Clock::now();

  TaskSpec test_spec;
  test_spec.task = Task::Reachability;
  test_spec.size = 12;
  test_spec.count = 500;
  test_spec.seed = 424243;
  const auto test_set = generate_dataset(test_spec);

  std::vector<double> accs;
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    TaskSpec train_spec;
    train_spec.task = Task::Reachability;
    train_spec.size = 12;
    train_spec.count = 2000;
    train_spec.seed = Rng::derive(seed, 0x7261696e);
    const auto train_set = generate_dataset(train_spec);

    ModelConfig mc;  // full default architecture
    mc.in_features = feature_width(Task::Reachability);
    mc.head = HeadKind::Endpoint;
    mc.seed = seed;
    Model model = Model::init(mc);

    TrainConfig tc;
    tc.epochs = 15;
    tc.seed = seed;
    train(model, train_set, tc);
    const EvalReport report = evaluate(model, test_set);
    accs.push_back(report.overall);
  }

  const double elapsed = seconds_since(start);
  out << "in-dist accs {" << accs[0] << ", " << accs[1] << ", " << accs[2] << "}, median "
      << median3(accs) << ", wall " << elapsed / 60.0 << " min";
  return median3(accs) >= 0.85 && elapsed < 30.0 * 60.0;
}

// ---------------------------------------------------------------------------

bool criterion_ablation(std::ostream& out) {
  const PlanningDesk desk;
  const std::vector<std::uint64_t> seeds{1, 2, 3};
  const AblationGridConfig grid = desk.grid(seeds);
  const auto in_dist = desk.split(8, 515151);
  const auto gen = desk.split(12, 525252);

  auto gen_accs = [&](AblationMode mode, ProjectionKind kind) {
    CellResult cell = run_ablation_cell(grid, {mode, kind}, in_dist, gen);
    std::vector<double> accs;
    for (const auto& s : cell.seeds) accs.push_back(s.generalization.overall);
    return accs;
  };

  const auto full = gen_accs(AblationMode::Full, ProjectionKind::Sparsemax);
  const auto no_global = gen_accs(AblationMode::NoGlobalPhi, ProjectionKind::Sparsemax);
  const auto softmax = gen_accs(AblationMode::Full, ProjectionKind::Softmax);

  const double full_med = median3(full);
  const double no_global_med = median3(no_global);
  const double softmax_med = median3(softmax);
  const double global_gap = (full_med - no_global_med) * 100.0;
  const double attention_gap = (full_med - softmax_med) * 100.0;

  out << "8x8->12x12 medians: full " << full_med << ", no-global-phi " << no_global_med
      << ", softmax " << softmax_med << "; gaps " << global_gap << " / " << attention_gap
      << " points";
  return global_gap >= 10.0 && attention_gap >= 5.0;
}

// ---------------------------------------------------------------------------

bool criterion_phi_semantics(std::ostream& out) {
  const PlanningDesk desk;
  const AblationGridConfig grid = desk.grid({1});
  const auto gen = desk.split(12, 525252);

  CellResult cell = run_ablation_cell(grid, {AblationMode::Full, ProjectionKind::Sparsemax},
                                      gen, gen);
  const PhiStatistics& phi = cell.seeds[0].generalization.phi;

  out << "phi_sum sep " << phi.separation_phi_sum << " (p " << phi.p_value_phi_sum
      << "), phi_global sep " << phi.separation_phi_global << " (p " << phi.p_value_phi_global
      << ")";
  return phi.separation_phi_sum > 0.0 && phi.p_value_phi_sum < 0.05 &&
         phi.separation_phi_global > 0.0 && phi.p_value_phi_global < 0.05;
}

// ---------------------------------------------------------------------------

bool criterion_determinism(std::ostream& out) {
  const char* cli = std::getenv("UCK_CLI_BIN");
  if (!cli) {
    out << "UCK_CLI_BIN not set";
    return false;
  }
  const std::string dir = "uck_acceptance_tmp";
  std::system(("rm -rf " + dir + " && mkdir -p " + dir).c_str());
  auto run = [&](const std::string& args) {
    return WEXITSTATUS(std::system((std::string(cli) + " " + args + " >/dev/null 2>&1").c_str()));
  };
  auto bytes = [](const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  };

  if (run("generate --task reachability --size 8 --count 60 --seed 11 --out " + dir +
          "/d.jsonl") != 0) {
    out << "generate failed";
    return false;
  }
  if (run("train --data " + dir + "/d.jsonl --out " + dir + "/m.ckpt --seed 3 --epochs 3 "
          "--d-model 16 --d-rule 16 --rules 4 --steps 2") != 0) {
    out << "train failed";
    return false;
  }
  if (run("eval --checkpoint " + dir + "/m.ckpt --data " + dir + "/d.jsonl --report " + dir +
          "/r.json --csv " + dir + "/r.csv") != 0) {
    out << "eval failed";
    return false;
  }

  const std::map<std::string, std::string> snapshot = {
      {"dataset", bytes(dir + "/d.jsonl")},   {"checkpoint", bytes(dir + "/m.ckpt")},
      {"log", bytes(dir + "/m.ckpt.log.jsonl")}, {"report", bytes(dir + "/r.json")},
      {"csv", bytes(dir + "/r.csv")}};

  if (run("rerun --manifest " + dir + "/d.jsonl.manifest.json") != 0 ||
      run("rerun --manifest " + dir + "/m.ckpt.manifest.json") != 0 ||
      run("rerun --manifest " + dir + "/r.json.manifest.json") != 0) {
    out << "rerun failed";
    return false;
  }

  const bool same = bytes(dir + "/d.jsonl") == snapshot.at("dataset") &&
                    bytes(dir + "/m.ckpt") == snapshot.at("checkpoint") &&
                    bytes(dir + "/m.ckpt.log.jsonl") == snapshot.at("log") &&
                    bytes(dir + "/r.json") == snapshot.at("report") &&
                    bytes(dir + "/r.csv") == snapshot.at("csv");
  out << (same ? "generate/train/eval outputs reproduced byte-for-byte from manifests"
               : "byte mismatch after rerun");
  return same;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<bool(std::ostream&)>>> criteria = {
      {"sparsemax", criterion_sparsemax},
      {"oracles", criterion_oracles},
      {"gradient", criterion_gradient},
      {"state_bounds", criterion_state_bounds},
      {"metrics", criterion_metrics},
      {"learning", criterion_learning},
      {"ablation", criterion_ablation},
      {"phi_semantics", criterion_phi_semantics},
      {"determinism", criterion_determinism},
  };

  std::set<std::string> selected;
  for (int i = 1; i < argc; ++i) selected.insert(argv[i]);
  for (const auto& name : selected) {
    if (std::none_of(criteria.begin(), criteria.end(),
                     [&](const auto& c) { return c.first == name; })) {
      std::cerr << "unknown criterion: " << name << "\n";
      return 2;
    }
  }

  bool all_passed = true;
  for (const auto& [name, fn] : criteria) {
    if (!selected.empty() && !selected.count(name)) continue;
    std::ostringstream detail;
    bool passed = false;
    try {
      passed = fn(detail);
    } catch (const std::exception& e) {
      detail << "exception: " << e.what();
    }
    std::cout << (passed ? "[PASS] " : "[FAIL] ") << name << " — " << detail.str() << std::endl;
    all_passed = all_passed && passed;
  }
  return all_passed ? 0 : 1;
}
