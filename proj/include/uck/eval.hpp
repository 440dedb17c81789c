#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "uck/model.hpp"
#include "uck/tasks.hpp"
#include "uck/train.hpp"

namespace uck {

// min/max of per-class accuracies; (0, 0) maps to 0.
double balance_score(double acc_pos, double acc_neg);

struct ClassStats {
  double mean = 0.0;
  double stddev = 0.0;  // sample std, 0 when fewer than two values
  std::size_t count = 0;
  bool available = false;
};

struct PhiStatistics {
  ClassStats phi_global_pos, phi_global_neg;  // final Φ by true class
  ClassStats phi_sum_pos, phi_sum_neg;        // final Σφ_i by true class
  double separation_phi_global = 0.0;         // mean(pos) - mean(neg)
  double separation_phi_sum = 0.0;
  // One-sided Welch test of mean(pos) > mean(neg), normal approximation.
  double p_value_phi_global = 1.0;
  double p_value_phi_sum = 1.0;

  nlohmann::json to_json() const;
  static PhiStatistics from_json(const nlohmann::json& j);
};

PhiStatistics phi_statistics(const std::vector<double>& phi_global,
                             const std::vector<double>& phi_sum, const std::vector<int>& labels);

struct EvalReport {
  std::size_t total = 0;
  std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
  std::size_t ties = 0;  // equal logits, predicted as class 0
  double overall = 0.0, acc_pos = 0.0, acc_neg = 0.0, balance = 0.0;
  PhiStatistics phi;
  nlohmann::json provenance;  // config/seed/paths, set by the caller

  nlohmann::json to_json() const;
  static EvalReport from_json(const nlohmann::json& j);
};

// Confusion counting and derived metrics for already-made predictions.
EvalReport tabulate(const std::vector<int>& labels, const std::vector<int>& predictions);

// Pure evaluation pass (dropout off, no tape). Requires the endpoint head
// for planning/reachability and the global head for sat.
EvalReport evaluate(const Model& model, const std::vector<GraphInstance>& data);

// Documented flat export: one row per report.
std::string eval_csv_header();
std::string eval_csv_row(const EvalReport& report);

void write_eval_report(const std::string& path, const EvalReport& report);
void write_eval_csv(const std::string& path, const std::vector<EvalReport>& reports);

// ---- ablation protocol ----------------------------------------------------

struct AblationCellSpec {
  AblationMode mode = AblationMode::Full;
  ProjectionKind attention = ProjectionKind::Sparsemax;

  std::string name() const;  // e.g. "full:sparsemax"
};

std::vector<AblationCellSpec> default_ablation_grid();  // 6 configurations × 2 kinds

struct SeedOutcome {
  std::uint64_t seed = 0;
  EvalReport in_dist;
  EvalReport generalization;
  std::vector<EpochLog> log;
};

struct CellResult {
  AblationCellSpec cell;
  std::vector<SeedOutcome> seeds;
  bool failed = false;
  std::string error;

  nlohmann::json to_json() const;
  static CellResult from_json(const nlohmann::json& j);
};

struct AblationGridConfig {
  ModelConfig base_model;
  TrainConfig base_train;
  TaskSpec train_spec;             // per-seed training data is regenerated
  std::vector<std::uint64_t> seeds;
};

// Trains and evaluates one (configuration, attention) cell across the seed
// list; seed s drives the data generator, the initializer, and the shuffle.
CellResult run_ablation_cell(const AblationGridConfig& grid, const AblationCellSpec& cell,
                             const std::vector<GraphInstance>& in_dist,
                             const std::vector<GraphInstance>& generalization);

// Whole grid with paired seeds; a cell failure is recorded in its result and
// does not abort the remaining cells.
std::vector<CellResult> run_ablation_grid(const AblationGridConfig& grid,
                                          const std::vector<AblationCellSpec>& cells,
                                          const std::vector<GraphInstance>& in_dist,
                                          const std::vector<GraphInstance>& generalization);

void mean_std(const std::vector<double>& values, double& mean, double& stddev);

std::string ablation_csv_header();
std::string ablation_csv_row(const CellResult& result);

}  // namespace uck
