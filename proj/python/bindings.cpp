#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "uck/checkpoint.hpp"
#include "uck/eval.hpp"
#include "uck/model.hpp"
#include "uck/sparse_projection.hpp"
#include "uck/tasks.hpp"
#include "uck/train.hpp"

namespace py = pybind11;
using namespace uck;

namespace {

ModelConfig config_from_kwargs(const py::kwargs& kwargs) {
  nlohmann::json j;
  for (auto item : kwargs) {
    const std::string key = py::cast<std::string>(item.first);
    if (py::isinstance<py::bool_>(item.second)) {
      j[key] = py::cast<bool>(item.second);
    } else if (py::isinstance<py::int_>(item.second)) {
      j[key] = py::cast<std::int64_t>(item.second);
    } else if (py::isinstance<py::float_>(item.second)) {
      j[key] = py::cast<double>(item.second);
    } else {
      j[key] = py::cast<std::string>(item.second);
    }
  }
  ModelConfig config = ModelConfig::from_json(j);
  config.validate();
  return config;
}

py::dict forward_dict(Model& model, const GraphInstance& instance) {
  ForwardCtx ctx{false, nullptr};
  NoGradGuard no_grad;
  ForwardOutput out = model.forward(instance, ctx);
  py::dict d;
  d["logits"] = out.logits.data();
  d["phi_global"] = out.diagnostics.final_phi_global;
  d["phi_sum"] = out.diagnostics.final_phi_sum;
  d["phi"] = out.diagnostics.final_phi;
  d["phi_global_trace"] = out.diagnostics.phi_global_trace;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Constraint-reasoning kernel: sparsemax projections, benchmark "
            "generators with exact oracles, model, training, and evaluation";

  // ---- sparse projection ----
  py::class_<SparsemaxResult>(m, "SparsemaxResult")
      .def_readonly("p", &SparsemaxResult::p)
      .def_readonly("support", &SparsemaxResult::support)
      .def_readonly("tau", &SparsemaxResult::tau);
  m.def("sparsemax", [](const std::vector<double>& z) { return sparsemax_forward(z); },
        py::arg("z"));
  m.def("sparsemax_jvp",
        [](const std::vector<double>& p, const std::vector<std::size_t>& support,
           const std::vector<double>& v) { return sparsemax_jvp(p, support, v); });
  m.def("softmax", [](const std::vector<double>& z) { return softmax_forward(z); }, py::arg("z"));

  // ---- oracles ----
  m.def("oracle_grid_feasible",
        [](const std::vector<std::uint8_t>& obstacle, std::size_t height, std::size_t width,
           std::pair<std::size_t, std::size_t> start, std::pair<std::size_t, std::size_t> goal) {
          return oracle_grid_feasible(obstacle, height, width, {start.first, start.second},
                                      {goal.first, goal.second});
        });
  m.def("oracle_reachable", &oracle_reachable);
  m.def("oracle_sat", [](std::size_t num_vars, const std::vector<std::vector<int>>& clauses) {
    return oracle_sat(CnfFormula{num_vars, clauses});
  });

  // ---- tasks ----
  py::class_<GraphInstance>(m, "GraphInstance")
      .def_property_readonly("task", [](const GraphInstance& g) { return to_string(g.task); })
      .def_readonly("seed", &GraphInstance::seed)
      .def_readonly("n_nodes", &GraphInstance::n_nodes)
      .def_readonly("edges", &GraphInstance::edges)
      .def_readonly("roles", &GraphInstance::roles)
      .def_readonly("src", &GraphInstance::src)
      .def_readonly("tgt", &GraphInstance::tgt)
      .def_readonly("label", &GraphInstance::label)
      .def("to_json", [](const GraphInstance& g) { return g.to_json().dump(); });
  m.def("oracle_label", &oracle_label);

  m.def(
      "generate_dataset",
      [](const std::string& task, std::size_t size, std::size_t count, double balance,
         std::uint64_t seed) {
        TaskSpec spec{task_from_string(task), size, count, balance, seed};
        return generate_dataset(spec);
      },
      py::arg("task"), py::arg("size"), py::arg("count"), py::arg("balance") = 0.5,
      py::arg("seed") = 0);
  m.def("write_dataset", [](const std::string& path, const std::string& task, std::size_t size,
                            double balance, std::uint64_t seed,
                            const std::vector<GraphInstance>& instances) {
    TaskSpec spec{task_from_string(task), size, instances.size(), balance, seed};
    write_dataset(path, Dataset{spec, instances});
  });
  m.def("read_dataset", [](const std::string& path) { return read_dataset(path).instances; });

  // ---- model ----
  py::class_<Model>(m, "Model")
      .def(py::init([](const py::kwargs& kwargs) { return Model::init(config_from_kwargs(kwargs)); }))
      .def("config", [](const Model& model) { return model.config().to_json().dump(); })
      .def("count_parameters", &Model::count_parameters)
      .def("forward", &forward_dict, py::arg("instance"))
      .def("save", [](Model& model, const std::string& path) { save_checkpoint(path, model); });
  m.def("load_model", &load_checkpoint, py::arg("path"));

  // ---- training / evaluation ----
  m.def(
      "train",
      [](Model& model, const std::vector<GraphInstance>& data, std::size_t epochs,
         std::size_t batch_size, double learning_rate, double weight_decay, double clip_norm,
         std::uint64_t seed) {
        TrainConfig tc;
        tc.epochs = epochs;
        tc.batch_size = batch_size;
        tc.learning_rate = learning_rate;
        tc.weight_decay = weight_decay;
        tc.clip_norm = clip_norm;
        tc.seed = seed;
        TrainResult result = train(model, data, tc);
        py::list log;
        for (const auto& entry : result.log) {
          py::dict d;
          d["epoch"] = entry.epoch;
          d["mean_loss"] = entry.mean_loss;
          d["train_acc"] = entry.train_acc;
          d["lr_last"] = entry.lr_last;
          log.append(d);
        }
        return log;
      },
      py::arg("model"), py::arg("data"), py::arg("epochs") = 15, py::arg("batch_size") = 32,
      py::arg("learning_rate") = 3e-4, py::arg("weight_decay") = 1e-2, py::arg("clip_norm") = 1.0,
      py::arg("seed") = 0);
  m.def("evaluate", [](const Model& model, const std::vector<GraphInstance>& data) {
    return evaluate(model, data).to_json().dump();
  });
  m.def("balance_score", &balance_score, py::arg("acc_pos"), py::arg("acc_neg"));
}
