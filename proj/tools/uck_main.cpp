// Command-line front end: generate / train / eval / ablate / rerun.
//
// Exit codes: 0 success, 2 configuration errors, 3 I/O errors, 4 numerical
// failures, 1 anything else.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "uck/checkpoint.hpp"
#include "uck/errors.hpp"
#include "uck/eval.hpp"
#include "uck/manifest.hpp"
#include "uck/model.hpp"
#include "uck/tasks.hpp"
#include "uck/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Relative output paths are rooted at $UCK_OUTPUT_ROOT when set.
std::string resolve_output(const std::string& path) {
  const char* root = std::getenv("UCK_OUTPUT_ROOT");
  if (!root || !*root || path.empty() || fs::path(path).is_absolute()) return path;
  return (fs::path(root) / path).string();
}

void ensure_parent_dir(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

json format_versions() {
  return json{{"manifest", uck::kManifestFormatVersion},
              {"dataset", uck::kDatasetFormatVersion},
              {"checkpoint", uck::kCheckpointFormatVersion}};
}

// ---- generate ---------------------------------------------------------------

void run_generate(const json& config) {
  const uck::TaskSpec spec = uck::TaskSpec::from_json(config.at("spec"));
  const std::string out = config.at("out");
  uck::Dataset dataset{spec, uck::generate_dataset(spec)};
  ensure_parent_dir(out);
  uck::write_dataset(out, dataset);
  std::cout << "wrote " << dataset.instances.size() << " instances to " << out << "\n";
}

int cmd_generate(const std::string& task_name, std::size_t size_flag, bool size_set,
                 std::size_t count, double balance, std::uint64_t seed, const std::string& out_flag) {
  uck::TaskSpec spec;
  spec.task = uck::task_from_string(task_name);
  spec.size = size_set ? size_flag
                       : (spec.task == uck::Task::Planning ? 8
                          : spec.task == uck::Task::Sat    ? 10
                                                           : 12);
  spec.count = count;
  spec.balance = balance;
  spec.seed = seed;

  const std::string out = resolve_output(out_flag);
  json config{{"spec", spec.to_json()}, {"out", out}};

  uck::RunManifest manifest;
  manifest.command = "generate";
  manifest.config = config;
  manifest.seeds = {seed};
  manifest.outputs = {out};
  manifest.format_versions = format_versions();
  ensure_parent_dir(out);
  uck::write_manifest(out + ".manifest.json", manifest);

  run_generate(config);
  return 0;
}

// ---- train ------------------------------------------------------------------

void run_train(const json& config) {
  const std::string data_path = config.at("data");
  const std::string out = config.at("out");
  const uck::ModelConfig mc = uck::ModelConfig::from_json(config.at("model"));
  const uck::TrainConfig tc = uck::TrainConfig::from_json(config.at("train"));
  mc.validate();
  tc.validate();

  const uck::Dataset dataset = uck::read_dataset(data_path);
  if (dataset.instances.empty()) throw uck::ConfigError("train: dataset has no instances");
  if (uck::feature_width(dataset.instances.front().task) != mc.in_features) {
    throw uck::ConfigError("train: dataset task does not match configured in_features");
  }

  uck::Model model = uck::Model::init(mc);
  uck::TrainResult result = uck::train(model, dataset.instances, tc);

  ensure_parent_dir(out);
  uck::save_checkpoint(out, model);
  uck::write_train_log(out + ".log.jsonl", result.log);
  std::cout << "trained " << tc.epochs << " epochs; final loss "
            << result.log.back().mean_loss << ", train acc " << result.log.back().train_acc
            << "; checkpoint " << out << "\n";
}

struct TrainFlags {
  std::string data, out, config_file;
  std::string ablation = "full";
  std::string attention, head, activation;
  std::uint64_t seed = 0;
  std::size_t epochs = 0, batch_size = 0, d_model = 0, d_rule = 0, rules = 0, steps = 0, heads = 0;
  double lr = 0, weight_decay = -1, clip_norm = 0, dropout = -1, phi_max = 0;
  bool paper_scale = false;
};

int cmd_train(const TrainFlags& f, const CLI::App* sub) {
  auto given = [&](const std::string& flag) { return sub->count(flag) > 0; };

  uck::ModelConfig mc;
  uck::TrainConfig tc;
  bool epochs_resolved = false;
  if (!f.config_file.empty()) {
    std::ifstream in(f.config_file);
    if (!in) throw uck::IoError("cannot open config file: " + f.config_file);
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw uck::ConfigError("config file is not valid json: " + std::string(e.what()));
    }
    if (j.contains("model")) mc = uck::ModelConfig::from_json(j.at("model"));
    if (j.contains("train")) {
      tc = uck::TrainConfig::from_json(j.at("train"));
      epochs_resolved = j.at("train").contains("epochs");
    }
  }

  // Input must exist before anything is written; it also fixes the head.
  const uck::Dataset dataset = uck::read_dataset(f.data);
  if (dataset.instances.empty()) throw uck::ConfigError("train: dataset has no instances");
  const uck::Task task = dataset.instances.front().task;
  mc.in_features = uck::feature_width(task);
  mc.head = task == uck::Task::Sat ? uck::HeadKind::Global : uck::HeadKind::Endpoint;

  if (given("--attention")) mc.attention = uck::projection_kind_from_string(f.attention);
  if (given("--head")) mc.head = uck::head_kind_from_string(f.head);
  if (given("--activation")) mc.activation = uck::activation_from_string(f.activation);
  if (given("--d-model")) mc.d_model = f.d_model;
  if (given("--d-rule")) mc.d_rule = f.d_rule;
  if (given("--rules")) mc.num_rules = f.rules;
  if (given("--steps")) mc.rollout_steps = f.steps;
  if (given("--heads")) mc.heads = f.heads;
  if (given("--phi-max")) mc.phi_max = f.phi_max;
  if (given("--dropout")) mc.dropout = f.dropout;
  if (given("--seed")) {
    mc.seed = f.seed;
    tc.seed = f.seed;
  }
  uck::apply_ablation(mc, uck::ablation_from_string(f.ablation));

  if (given("--lr")) tc.learning_rate = f.lr;
  if (given("--weight-decay")) tc.weight_decay = f.weight_decay;
  if (given("--clip-norm")) tc.clip_norm = f.clip_norm;
  if (given("--batch-size")) tc.batch_size = f.batch_size;
  if (given("--epochs")) {
    tc.epochs = f.epochs;
  } else if (!epochs_resolved) {
    tc.epochs = f.paper_scale ? 30 : 15;  // desk-scale default
  }

  mc.validate();
  tc.validate();

  const std::string out = resolve_output(f.out);
  json config{{"data", f.data}, {"out", out}, {"model", mc.to_json()}, {"train", tc.to_json()}};

  uck::RunManifest manifest;
  manifest.command = "train";
  manifest.config = config;
  manifest.seeds = {tc.seed};
  manifest.inputs = {f.data};
  manifest.outputs = {out, out + ".log.jsonl"};
  manifest.format_versions = format_versions();
  ensure_parent_dir(out);
  uck::write_manifest(out + ".manifest.json", manifest);

  run_train(config);
  return 0;
}

// ---- eval -------------------------------------------------------------------

void run_eval(const json& config) {
  const std::string checkpoint_path = config.at("checkpoint");
  const std::string data_path = config.at("data");
  const std::string report_path = config.at("report");
  const std::string csv_path = config.value("csv", "");

  uck::Model model = uck::load_checkpoint(checkpoint_path);
  const uck::Dataset dataset = uck::read_dataset(data_path);
  uck::EvalReport report = uck::evaluate(model, dataset.instances);
  report.provenance = json{{"checkpoint", checkpoint_path},
                           {"data", data_path},
                           {"model", model.config().to_json()},
                           {"dataset_spec", dataset.spec.to_json()}};
  ensure_parent_dir(report_path);
  uck::write_eval_report(report_path, report);
  if (!csv_path.empty()) {
    ensure_parent_dir(csv_path);
    uck::write_eval_csv(csv_path, {report});
  }
  std::cout << "overall " << report.overall << ", acc_pos " << report.acc_pos << ", acc_neg "
            << report.acc_neg << ", balance " << report.balance << "\n";
}

int cmd_eval(const std::string& checkpoint, const std::string& data, const std::string& report,
             const std::string& csv) {
  // Header check up front so mismatches fail before any output exists.
  const uck::ModelConfig mc = uck::read_checkpoint_config(checkpoint);
  const std::string report_path = resolve_output(report);
  const std::string csv_path = csv.empty() ? "" : resolve_output(csv);

  json config{{"checkpoint", checkpoint}, {"data", data}, {"report", report_path}};
  if (!csv_path.empty()) config["csv"] = csv_path;

  uck::RunManifest manifest;
  manifest.command = "eval";
  manifest.config = config;
  manifest.seeds = {mc.seed};
  manifest.inputs = {checkpoint, data};
  manifest.outputs = {report_path};
  if (!csv_path.empty()) manifest.outputs.push_back(csv_path);
  manifest.format_versions = format_versions();
  ensure_parent_dir(report_path);
  uck::write_manifest(report_path + ".manifest.json", manifest);

  run_eval(config);
  return 0;
}

// ---- ablate -------------------------------------------------------------------

std::string cell_dir_name(const uck::AblationCellSpec& cell) {
  return uck::to_string(cell.mode) + "_" + uck::to_string(cell.attention);
}

void run_ablate(const json& config) {
  const std::string out_dir = config.at("out_dir");
  uck::AblationGridConfig grid;
  grid.base_model = uck::ModelConfig::from_json(config.at("model"));
  grid.base_train = uck::TrainConfig::from_json(config.at("train"));
  grid.train_spec = uck::TaskSpec::from_json(config.at("train_spec"));
  grid.seeds = config.at("seeds").get<std::vector<std::uint64_t>>();

  std::vector<uck::AblationCellSpec> cells;
  for (const auto& name : config.at("cells")) {
    const std::string s = name.get<std::string>();
    const auto colon = s.find(':');
    if (colon == std::string::npos) throw uck::ConfigError("bad cell spec: " + s);
    cells.push_back({uck::ablation_from_string(s.substr(0, colon)),
                     uck::projection_kind_from_string(s.substr(colon + 1))});
  }

  uck::TaskSpec in_spec = grid.train_spec;
  in_spec.count = config.at("eval_count");
  in_spec.seed = uck::Rng::derive(config.at("seed").get<std::uint64_t>(), 1001);
  uck::TaskSpec gen_spec = in_spec;
  gen_spec.size = config.at("gen_size");
  gen_spec.seed = uck::Rng::derive(config.at("seed").get<std::uint64_t>(), 1002);

  const auto in_dist = uck::generate_dataset(in_spec);
  const auto generalization = uck::generate_dataset(gen_spec);

  std::vector<uck::CellResult> results;
  for (const auto& cell : cells) {
    const fs::path cell_dir = fs::path(out_dir) / cell_dir_name(cell);
    fs::create_directories(cell_dir);
    const std::string result_path = (cell_dir / "cell_result.json").string();
    const std::string manifest_path = (cell_dir / "manifest.json").string();

    json cell_config = config;
    cell_config["cells"] = json::array({cell.name()});

    // Resume: a finished cell with a matching manifest is not recomputed.
    if (fs::exists(result_path) && fs::exists(manifest_path)) {
      const uck::RunManifest existing = uck::read_manifest(manifest_path);
      if (existing.config == cell_config) {
        std::ifstream in(result_path);
        json j;
        in >> j;
        results.push_back(uck::CellResult::from_json(j));
        std::cout << "cell " << cell.name() << ": reused existing result\n";
        continue;
      }
    }

    uck::RunManifest cell_manifest;
    cell_manifest.command = "ablate";
    cell_manifest.config = cell_config;
    cell_manifest.seeds = grid.seeds;
    cell_manifest.outputs = {result_path};
    cell_manifest.format_versions = format_versions();
    uck::write_manifest(manifest_path, cell_manifest);

    uck::CellResult result = [&] {
      try {
        return uck::run_ablation_cell(grid, cell, in_dist, generalization);
      } catch (const std::exception& e) {
        uck::CellResult failed;
        failed.cell = cell;
        failed.failed = true;
        failed.error = e.what();
        return failed;
      }
    }();

    std::ofstream out(result_path, std::ios::binary);
    if (!out) throw uck::IoError("cannot open for writing: " + result_path);
    out << result.to_json().dump(2) << '\n';
    std::cout << "cell " << cell.name() << (result.failed ? ": FAILED " + result.error : ": done")
              << "\n";
    results.push_back(std::move(result));
  }

  json all = json::array();
  for (const auto& r : results) all.push_back(r.to_json());
  std::ofstream agg_json(fs::path(out_dir) / "ablation_results.json", std::ios::binary);
  agg_json << all.dump(2) << '\n';

  std::ofstream table(fs::path(out_dir) / "ablation_table.csv", std::ios::binary);
  table << uck::ablation_csv_header() << '\n';
  for (const auto& r : results) table << uck::ablation_csv_row(r) << '\n';
  std::cout << "ablation table: " << (fs::path(out_dir) / "ablation_table.csv").string() << "\n";
}

struct AblateFlags {
  std::string task = "planning";
  std::size_t train_size = 8, gen_size = 0, train_count = 0, eval_count = 0;
  std::vector<std::uint64_t> seeds;
  std::string out_dir;
  std::vector<std::string> cells;
  std::uint64_t seed = 0;
  std::size_t epochs = 0, d_model = 0, d_rule = 0, rules = 0, steps = 0, batch_size = 0;
  double lr = 0, dropout = -1;
  bool paper_scale = false;
};

int cmd_ablate(const AblateFlags& f, const CLI::App* sub) {
  auto given = [&](const std::string& flag) { return sub->count(flag) > 0; };

  uck::ModelConfig mc;
  uck::TrainConfig tc;
  const uck::Task task = uck::task_from_string(f.task);
  mc.in_features = uck::feature_width(task);
  mc.head = task == uck::Task::Sat ? uck::HeadKind::Global : uck::HeadKind::Endpoint;
  if (given("--d-model")) mc.d_model = f.d_model;
  if (given("--d-rule")) mc.d_rule = f.d_rule;
  if (given("--rules")) mc.num_rules = f.rules;
  if (given("--steps")) mc.rollout_steps = f.steps;
  if (given("--dropout")) mc.dropout = f.dropout;
  if (given("--lr")) tc.learning_rate = f.lr;
  if (given("--batch-size")) tc.batch_size = f.batch_size;
  tc.epochs = given("--epochs") ? f.epochs : (f.paper_scale ? 30 : 15);
  mc.validate();
  tc.validate();

  uck::TaskSpec train_spec;
  train_spec.task = task;
  train_spec.size = f.train_size;
  train_spec.count = given("--train-count") ? f.train_count : (f.paper_scale ? 10000 : 2000);
  train_spec.seed = f.seed;  // re-derived per run seed

  const std::size_t gen_size = given("--gen-size") ? f.gen_size : (f.paper_scale ? 16 : 12);
  const std::size_t eval_count = given("--eval-count") ? f.eval_count : (f.paper_scale ? 2000 : 500);
  std::vector<std::uint64_t> seeds = f.seeds;
  if (seeds.empty()) seeds = f.paper_scale ? std::vector<std::uint64_t>{1, 2, 3, 4, 5}
                                           : std::vector<std::uint64_t>{1, 2, 3};

  std::vector<std::string> cells = f.cells;
  if (cells.empty()) {
    for (const auto& cell : uck::default_ablation_grid()) cells.push_back(cell.name());
  }

  const std::string out_dir = resolve_output(f.out_dir);
  json config{{"out_dir", out_dir},
              {"model", mc.to_json()},
              {"train", tc.to_json()},
              {"train_spec", train_spec.to_json()},
              {"seeds", seeds},
              {"cells", cells},
              {"gen_size", gen_size},
              {"eval_count", eval_count},
              {"seed", f.seed}};

  uck::RunManifest manifest;
  manifest.command = "ablate";
  manifest.config = config;
  manifest.seeds = seeds;
  manifest.outputs = {(fs::path(out_dir) / "ablation_table.csv").string(),
                      (fs::path(out_dir) / "ablation_results.json").string()};
  manifest.format_versions = format_versions();
  fs::create_directories(out_dir);
  uck::write_manifest((fs::path(out_dir) / "manifest.json").string(), manifest);

  run_ablate(config);
  return 0;
}

// ---- rerun --------------------------------------------------------------------

int cmd_rerun(const std::string& manifest_path) {
  const uck::RunManifest manifest = uck::read_manifest(manifest_path);
  if (manifest.command == "generate") {
    run_generate(manifest.config);
  } else if (manifest.command == "train") {
    run_train(manifest.config);
  } else if (manifest.command == "eval") {
    run_eval(manifest.config);
  } else if (manifest.command == "ablate") {
    run_ablate(manifest.config);
  } else {
    throw uck::ConfigError("manifest has unknown command: " + manifest.command);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constraint-reasoning kernel: datasets, training, evaluation, ablations"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "Generate a labeled benchmark dataset");
  std::string g_task = "reachability", g_out = "dataset.jsonl";
  std::size_t g_size = 0, g_count = 2000;
  double g_balance = 0.5;
  std::uint64_t g_seed = 0;
  gen->add_option("--task", g_task, "planning | sat | reachability");
  auto* g_size_opt = gen->add_option("--size", g_size, "grid side / variable count / node count");
  gen->add_option("--count", g_count, "number of instances");
  gen->add_option("--balance", g_balance, "target positive fraction");
  gen->add_option("--seed", g_seed, "generator seed");
  gen->add_option("--out", g_out, "output dataset path")->required();

  // train
  auto* tr = app.add_subcommand("train", "Train a model on a dataset");
  TrainFlags tf;
  tr->add_option("--data", tf.data, "training dataset path")->required();
  tr->add_option("--out", tf.out, "output checkpoint path")->required();
  tr->add_option("--config", tf.config_file, "json config file {model:{...},train:{...}}");
  tr->add_option("--ablation", tf.ablation,
                 "full | no-phi | no-global-phi | phi-keys-only | phi-effects-only | no-dsp");
  tr->add_option("--attention", tf.attention, "sparsemax | softmax");
  tr->add_option("--head", tf.head, "endpoint | global");
  tr->add_option("--activation", tf.activation, "relu | tanh");
  tr->add_option("--seed", tf.seed, "model + training seed");
  tr->add_option("--epochs", tf.epochs);
  tr->add_option("--batch-size", tf.batch_size);
  tr->add_option("--lr", tf.lr);
  tr->add_option("--weight-decay", tf.weight_decay);
  tr->add_option("--clip-norm", tf.clip_norm);
  tr->add_option("--dropout", tf.dropout);
  tr->add_option("--d-model", tf.d_model);
  tr->add_option("--d-rule", tf.d_rule);
  tr->add_option("--rules", tf.rules);
  tr->add_option("--steps", tf.steps);
  tr->add_option("--heads", tf.heads);
  tr->add_option("--phi-max", tf.phi_max);
  tr->add_flag("--paper-scale", tf.paper_scale, "use the full-scale training defaults");

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  std::string e_checkpoint, e_data, e_report = "report.json", e_csv;
  ev->add_option("--checkpoint", e_checkpoint)->required();
  ev->add_option("--data", e_data)->required();
  ev->add_option("--report", e_report, "output report (json)");
  ev->add_option("--csv", e_csv, "optional flat csv export");

  // ablate
  auto* ab = app.add_subcommand("ablate", "Run the configuration × attention grid");
  AblateFlags af;
  ab->add_option("--task", af.task, "planning | sat | reachability");
  ab->add_option("--train-size", af.train_size);
  ab->add_option("--gen-size", af.gen_size, "generalization problem size");
  ab->add_option("--train-count", af.train_count);
  ab->add_option("--eval-count", af.eval_count);
  ab->add_option("--seeds", af.seeds, "paired seed list")->delimiter(',');
  ab->add_option("--seed", af.seed, "base seed for the evaluation splits");
  ab->add_option("--out-dir", af.out_dir)->required();
  ab->add_option("--cells", af.cells, "subset of cells, e.g. full:sparsemax")->delimiter(',');
  ab->add_option("--epochs", af.epochs);
  ab->add_option("--batch-size", af.batch_size);
  ab->add_option("--lr", af.lr);
  ab->add_option("--dropout", af.dropout);
  ab->add_option("--d-model", af.d_model);
  ab->add_option("--d-rule", af.d_rule);
  ab->add_option("--rules", af.rules);
  ab->add_option("--steps", af.steps);
  ab->add_flag("--paper-scale", af.paper_scale, "use the full-scale grid defaults");

  // rerun
  auto* rr = app.add_subcommand("rerun", "Re-execute a command from its manifest");
  std::string r_manifest;
  rr->add_option("--manifest", r_manifest)->required();

  try {
    app.parse(argc, argv);
    if (gen->parsed()) {
      return cmd_generate(g_task, g_size, g_size_opt->count() > 0, g_count, g_balance, g_seed, g_out);
    }
    if (tr->parsed()) return cmd_train(tf, tr);
    if (ev->parsed()) return cmd_eval(e_checkpoint, e_data, e_report, e_csv);
    if (ab->parsed()) return cmd_ablate(af, ab);
    if (rr->parsed()) return cmd_rerun(r_manifest);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const uck::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const uck::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 3;
  } catch (const uck::NumericError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
