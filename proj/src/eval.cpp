#include "uck/eval.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "uck/errors.hpp"

namespace uck {

double balance_score(double acc_pos, double acc_neg) {
  if (acc_pos < 0.0 || acc_pos > 1.0 || acc_neg < 0.0 || acc_neg > 1.0) {
    throw std::invalid_argument("balance_score: accuracies must be in [0, 1]");
  }
  const double hi = std::max(acc_pos, acc_neg);
  if (hi == 0.0) return 0.0;  // degenerate predictor
  return std::min(acc_pos, acc_neg) / hi;
}

namespace {

ClassStats class_stats(const std::vector<double>& values) {
  ClassStats s;
  s.count = values.size();
  s.available = !values.empty();
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() >= 2) {
    double sq = 0.0;
    for (double v : values) sq += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(sq / static_cast<double>(values.size() - 1));
  }
  return s;
}

// One-sided Welch test, normal approximation of the t statistic.
double welch_p_greater(const ClassStats& pos, const ClassStats& neg) {
  if (!pos.available || !neg.available) return 1.0;
  const double var_term = pos.stddev * pos.stddev / static_cast<double>(pos.count) +
                          neg.stddev * neg.stddev / static_cast<double>(neg.count);
  const double diff = pos.mean - neg.mean;
  if (var_term == 0.0) return diff > 0.0 ? 0.0 : 1.0;
  const double t = diff / std::sqrt(var_term);
  return 0.5 * std::erfc(t / std::sqrt(2.0));
}

nlohmann::json stats_json(const ClassStats& s) {
  return nlohmann::json{
      {"mean", s.mean}, {"stddev", s.stddev}, {"count", s.count}, {"available", s.available}};
}

}  // namespace

PhiStatistics phi_statistics(const std::vector<double>& phi_global,
                             const std::vector<double>& phi_sum, const std::vector<int>& labels) {
  if (phi_global.size() != labels.size() || phi_sum.size() != labels.size()) {
    throw std::invalid_argument("phi_statistics: size mismatch");
  }
  std::vector<double> g_pos, g_neg, s_pos, s_neg;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    (labels[i] == 1 ? g_pos : g_neg).push_back(phi_global[i]);
    (labels[i] == 1 ? s_pos : s_neg).push_back(phi_sum[i]);
  }
  PhiStatistics stats;
  stats.phi_global_pos = class_stats(g_pos);
  stats.phi_global_neg = class_stats(g_neg);
  stats.phi_sum_pos = class_stats(s_pos);
  stats.phi_sum_neg = class_stats(s_neg);
  if (stats.phi_global_pos.available && stats.phi_global_neg.available) {
    stats.separation_phi_global = stats.phi_global_pos.mean - stats.phi_global_neg.mean;
    stats.separation_phi_sum = stats.phi_sum_pos.mean - stats.phi_sum_neg.mean;
  }
  stats.p_value_phi_global = welch_p_greater(stats.phi_global_pos, stats.phi_global_neg);
  stats.p_value_phi_sum = welch_p_greater(stats.phi_sum_pos, stats.phi_sum_neg);
  return stats;
}

nlohmann::json PhiStatistics::to_json() const {
  return nlohmann::json{{"phi_global_pos", stats_json(phi_global_pos)},
                        {"phi_global_neg", stats_json(phi_global_neg)},
                        {"phi_sum_pos", stats_json(phi_sum_pos)},
                        {"phi_sum_neg", stats_json(phi_sum_neg)},
                        {"separation_phi_global", separation_phi_global},
                        {"separation_phi_sum", separation_phi_sum},
                        {"p_value_phi_global", p_value_phi_global},
                        {"p_value_phi_sum", p_value_phi_sum}};
}

namespace {

ClassStats stats_from_json(const nlohmann::json& j) {
  ClassStats s;
  s.mean = j.at("mean");
  s.stddev = j.at("stddev");
  s.count = j.at("count");
  s.available = j.at("available");
  return s;
}

}  // namespace

PhiStatistics PhiStatistics::from_json(const nlohmann::json& j) {
  PhiStatistics s;
  s.phi_global_pos = stats_from_json(j.at("phi_global_pos"));
  s.phi_global_neg = stats_from_json(j.at("phi_global_neg"));
  s.phi_sum_pos = stats_from_json(j.at("phi_sum_pos"));
  s.phi_sum_neg = stats_from_json(j.at("phi_sum_neg"));
  s.separation_phi_global = j.at("separation_phi_global");
  s.separation_phi_sum = j.at("separation_phi_sum");
  s.p_value_phi_global = j.at("p_value_phi_global");
  s.p_value_phi_sum = j.at("p_value_phi_sum");
  return s;
}

nlohmann::json EvalReport::to_json() const {
  return nlohmann::json{{"total", total},       {"tp", tp},
                        {"tn", tn},             {"fp", fp},
                        {"fn", fn},             {"ties", ties},
                        {"overall", overall},   {"acc_pos", acc_pos},
                        {"acc_neg", acc_neg},   {"balance", balance},
                        {"phi", phi.to_json()}, {"provenance", provenance}};
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
  EvalReport r;
  r.total = j.at("total");
  r.tp = j.at("tp");
  r.tn = j.at("tn");
  r.fp = j.at("fp");
  r.fn = j.at("fn");
  r.ties = j.at("ties");
  r.overall = j.at("overall");
  r.acc_pos = j.at("acc_pos");
  r.acc_neg = j.at("acc_neg");
  r.balance = j.at("balance");
  r.phi = PhiStatistics::from_json(j.at("phi"));
  r.provenance = j.at("provenance");
  return r;
}

EvalReport tabulate(const std::vector<int>& labels, const std::vector<int>& predictions) {
  if (labels.size() != predictions.size()) {
    throw std::invalid_argument("tabulate: labels/predictions size mismatch");
  }
  EvalReport report;
  report.total = labels.size();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1) {
      predictions[i] == 1 ? ++report.tp : ++report.fn;
    } else {
      predictions[i] == 0 ? ++report.tn : ++report.fp;
    }
  }
  report.overall = report.total
                       ? static_cast<double>(report.tp + report.tn) / static_cast<double>(report.total)
                       : 0.0;
  const std::size_t pos_total = report.tp + report.fn;
  const std::size_t neg_total = report.tn + report.fp;
  report.acc_pos = pos_total ? static_cast<double>(report.tp) / static_cast<double>(pos_total) : 0.0;
  report.acc_neg = neg_total ? static_cast<double>(report.tn) / static_cast<double>(neg_total) : 0.0;
  report.balance = balance_score(report.acc_pos, report.acc_neg);
  return report;
}

EvalReport evaluate(const Model& model, const std::vector<GraphInstance>& data) {
  if (data.empty()) throw ConfigError("evaluate: dataset is empty");
  const Task task = data.front().task;
  const HeadKind required = task == Task::Sat ? HeadKind::Global : HeadKind::Endpoint;
  if (model.config().head != required) {
    throw ConfigError("evaluate: task " + uck::to_string(task) + " requires the " +
                      uck::to_string(required) + " head, checkpoint has " +
                      uck::to_string(model.config().head));
  }

  NoGradGuard no_grad;
  ForwardCtx ctx{/*training=*/false, nullptr};

  std::vector<double> phi_global, phi_sum;
  std::vector<int> labels, predictions;
  std::size_t ties = 0;

  for (const auto& inst : data) {
    ForwardOutput out = model.forward(inst, ctx);
    const double z0 = out.logits.at(0), z1 = out.logits.at(1);
    if (z0 == z1) ++ties;
    predictions.push_back(z1 > z0 ? 1 : 0);  // ties predict class 0
    labels.push_back(inst.label);
    phi_global.push_back(out.diagnostics.final_phi_global);
    phi_sum.push_back(out.diagnostics.final_phi_sum);
  }

  EvalReport report = tabulate(labels, predictions);
  report.ties = ties;
  report.phi = phi_statistics(phi_global, phi_sum, labels);
  return report;
}

std::string eval_csv_header() {
  return "total,tp,tn,fp,fn,ties,overall,acc_pos,acc_neg,balance,"
         "phi_global_mean_pos,phi_global_mean_neg,phi_global_sep,phi_global_p,"
         "phi_sum_mean_pos,phi_sum_mean_neg,phi_sum_sep,phi_sum_p";
}

std::string eval_csv_row(const EvalReport& r) {
  std::ostringstream os;
  os.precision(17);
  os << r.total << ',' << r.tp << ',' << r.tn << ',' << r.fp << ',' << r.fn << ',' << r.ties << ','
     << r.overall << ',' << r.acc_pos << ',' << r.acc_neg << ',' << r.balance << ','
     << r.phi.phi_global_pos.mean << ',' << r.phi.phi_global_neg.mean << ','
     << r.phi.separation_phi_global << ',' << r.phi.p_value_phi_global << ','
     << r.phi.phi_sum_pos.mean << ',' << r.phi.phi_sum_neg.mean << ',' << r.phi.separation_phi_sum
     << ',' << r.phi.p_value_phi_sum;
  return os.str();
}

void write_eval_report(const std::string& path, const EvalReport& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << report.to_json().dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

void write_eval_csv(const std::string& path, const std::vector<EvalReport>& reports) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << eval_csv_header() << '\n';
  for (const auto& r : reports) out << eval_csv_row(r) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

// ---- ablation protocol ------------------------------------------------------

std::string AblationCellSpec::name() const {
  return uck::to_string(mode) + ":" + uck::to_string(attention);
}

std::vector<AblationCellSpec> default_ablation_grid() {
  std::vector<AblationCellSpec> cells;
  for (AblationMode mode : {AblationMode::Full, AblationMode::NoPhi, AblationMode::NoGlobalPhi,
                            AblationMode::PhiInKeysOnly, AblationMode::PhiInEffectsOnly,
                            AblationMode::NoDsp}) {
    for (ProjectionKind kind : {ProjectionKind::Sparsemax, ProjectionKind::Softmax}) {
      cells.push_back({mode, kind});
    }
  }
  return cells;
}

void mean_std(const std::vector<double>& values, double& mean, double& stddev) {
  mean = 0.0;
  stddev = 0.0;
  if (values.empty()) return;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  if (values.size() >= 2) {
    double sq = 0.0;
    for (double v : values) sq += (v - mean) * (v - mean);
    stddev = std::sqrt(sq / static_cast<double>(values.size() - 1));
  }
}

CellResult run_ablation_cell(const AblationGridConfig& grid, const AblationCellSpec& cell,
                             const std::vector<GraphInstance>& in_dist,
                             const std::vector<GraphInstance>& generalization) {
  CellResult result;
  result.cell = cell;
  for (std::uint64_t seed : grid.seeds) {
    ModelConfig mc = grid.base_model;
    apply_ablation(mc, cell.mode);
    mc.attention = cell.attention;
    mc.seed = seed;

    TrainConfig tc = grid.base_train;
    tc.seed = seed;

    TaskSpec data_spec = grid.train_spec;
    data_spec.seed = Rng::derive(seed, 0x7261696e);  // seed varies data and init together
    const std::vector<GraphInstance> train_data = generate_dataset(data_spec);

    Model model = Model::init(mc);
    SeedOutcome outcome;
    outcome.seed = seed;
    outcome.log = train(model, train_data, tc).log;
    outcome.in_dist = evaluate(model, in_dist);
    outcome.generalization = evaluate(model, generalization);
    nlohmann::json prov{{"cell", cell.name()}, {"seed", seed}, {"model", mc.to_json()}};
    outcome.in_dist.provenance = prov;
    outcome.generalization.provenance = prov;
    result.seeds.push_back(std::move(outcome));
  }
  return result;
}

std::vector<CellResult> run_ablation_grid(const AblationGridConfig& grid,
                                          const std::vector<AblationCellSpec>& cells,
                                          const std::vector<GraphInstance>& in_dist,
                                          const std::vector<GraphInstance>& generalization) {
  std::vector<CellResult> results;
  for (const auto& cell : cells) {
    try {
      results.push_back(run_ablation_cell(grid, cell, in_dist, generalization));
    } catch (const std::exception& e) {
      CellResult failed;
      failed.cell = cell;
      failed.failed = true;
      failed.error = e.what();
      results.push_back(std::move(failed));
    }
  }
  return results;
}

nlohmann::json CellResult::to_json() const {
  nlohmann::json j{{"cell", cell.name()},
                   {"mode", uck::to_string(cell.mode)},
                   {"attention", uck::to_string(cell.attention)},
                   {"failed", failed},
                   {"error", error}};
  nlohmann::json seed_array = nlohmann::json::array();
  for (const auto& s : seeds) {
    seed_array.push_back(nlohmann::json{{"seed", s.seed},
                                        {"in_dist", s.in_dist.to_json()},
                                        {"generalization", s.generalization.to_json()}});
  }
  j["seeds"] = seed_array;
  return j;
}

CellResult CellResult::from_json(const nlohmann::json& j) {
  CellResult r;
  r.cell.mode = ablation_from_string(j.at("mode"));
  r.cell.attention = projection_kind_from_string(j.at("attention"));
  r.failed = j.at("failed");
  r.error = j.at("error");
  for (const auto& s : j.at("seeds")) {
    SeedOutcome outcome;
    outcome.seed = s.at("seed");
    outcome.in_dist = EvalReport::from_json(s.at("in_dist"));
    outcome.generalization = EvalReport::from_json(s.at("generalization"));
    r.seeds.push_back(std::move(outcome));
  }
  return r;
}

std::string ablation_csv_header() {
  return "cell,mode,attention,seeds,in_acc_mean,in_acc_std,gen_acc_mean,gen_acc_std,"
         "gen_balance_mean,gen_balance_std,gen_acc_neg_mean,failed";
}

std::string ablation_csv_row(const CellResult& r) {
  std::vector<double> in_acc, gen_acc, gen_balance, gen_acc_neg;
  for (const auto& s : r.seeds) {
    in_acc.push_back(s.in_dist.overall);
    gen_acc.push_back(s.generalization.overall);
    gen_balance.push_back(s.generalization.balance);
    gen_acc_neg.push_back(s.generalization.acc_neg);
  }
  double im, is, gm, gs, bm, bs, nm, ns;
  mean_std(in_acc, im, is);
  mean_std(gen_acc, gm, gs);
  mean_std(gen_balance, bm, bs);
  mean_std(gen_acc_neg, nm, ns);
  std::ostringstream os;
  os.precision(17);
  os << r.cell.name() << ',' << uck::to_string(r.cell.mode) << ','
     << uck::to_string(r.cell.attention) << ',' << r.seeds.size() << ',' << im << ',' << is << ','
     << gm << ',' << gs << ',' << bm << ',' << bs << ',' << nm << ',' << (r.failed ? 1 : 0);
  return os.str();
}

}  // namespace uck
