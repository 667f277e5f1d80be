#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "sdsim/analysis.hpp"
#include "sdsim/config.hpp"
#include "sdsim/errors.hpp"
#include "sdsim/hierarchy.hpp"
#include "sdsim/netcore.hpp"
#include "sdsim/protocol.hpp"
#include "sdsim/runner.hpp"
#include "sdsim/trajectory_stats.hpp"
#include "sdsim/version.hpp"

namespace py = pybind11;
using namespace sdsim;

namespace {

FrequencySpec frequency_from_arg(const py::object& rule) {
  if (py::isinstance<py::str>(rule)) {
    const auto name = rule.cast<std::string>();
    if (name == "uniform") return FrequencySpec::uniform();
    if (name == "odd_items_double") return FrequencySpec::odd_items_double();
    throw py::value_error("unknown frequency rule '" + name + "'");
  }
  return FrequencySpec::explicit_weights(rule.cast<Vector>());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Two-layer semantic network with hidden-layer atrophy and relearning";
  m.attr("__version__") = kToolVersion;

  py::register_exception<ConfigError>(m, "ConfigError");
  py::register_exception<RuntimeFault>(m, "RuntimeFault");

  py::enum_<Activation>(m, "Activation")
      .value("linear", Activation::Linear)
      .value("relu", Activation::Relu);

  py::enum_<NaiveModel>(m, "NaiveModel")
      .value("zero", NaiveModel::Zero)
      .value("mean", NaiveModel::Mean);

  py::enum_<ResponseClass>(m, "ResponseClass")
      .value("correct", ResponseClass::Correct)
      .value("category_coordinate", ResponseClass::CategoryCoordinate)
      .value("cross_category", ResponseClass::CrossCategory)
      .value("superordinate", ResponseClass::Superordinate)
      .value("unclassified", ResponseClass::Unclassified);

  py::class_<TreeSpec>(m, "TreeSpec")
      .def(py::init<>())
      .def(py::init([](int branching, int depth, std::uint64_t seed) {
             return TreeSpec{branching, depth, seed};
           }),
           py::arg("branching") = 2, py::arg("depth") = 4, py::arg("seed") = 0)
      .def_readwrite("branching", &TreeSpec::branching)
      .def_readwrite("depth", &TreeSpec::depth)
      .def_readwrite("seed", &TreeSpec::seed);

  py::class_<HierarchyTree>(m, "HierarchyTree")
      .def_property_readonly("branching", &HierarchyTree::branching)
      .def_property_readonly("depth", &HierarchyTree::depth)
      .def_property_readonly("node_count", &HierarchyTree::node_count)
      .def_property_readonly("item_count", &HierarchyTree::item_count)
      .def_property_readonly("feature_count", &HierarchyTree::feature_count)
      .def("level_of_feature", &HierarchyTree::level_of_feature);

  py::class_<Dataset>(m, "Dataset")
      .def_readonly("X", &Dataset::X)
      .def_readonly("Y", &Dataset::Y)
      .def_readonly("freq", &Dataset::freq)
      .def_readonly("level_of_feature", &Dataset::level_of_feature)
      .def_readonly("branching", &Dataset::branching)
      .def_readonly("depth", &Dataset::depth)
      .def_property_readonly("items", &Dataset::items)
      .def_property_readonly("features", &Dataset::features);

  m.def("build_hierarchy", &build_hierarchy, py::arg("spec"));
  m.def("make_dataset", &make_dataset, py::arg("tree"));
  m.def(
      "apply_frequency",
      [](const Dataset& ds, const py::object& rule) {
        return apply_frequency(ds, frequency_from_arg(rule));
      },
      py::arg("dataset"), py::arg("rule"),
      "rule: 'uniform', 'odd_items_double' or an explicit weight vector");
  m.def("hierarchy_distance", &hierarchy_distance, py::arg("tree"),
        py::arg("item_a"), py::arg("item_b"));
  m.def("save_dataset", &save_dataset_file, py::arg("dataset"), py::arg("path"));
  m.def("load_dataset", &load_dataset_file, py::arg("path"));

  py::class_<NetworkConfig>(m, "NetworkConfig")
      .def(py::init<>())
      .def_readwrite("hidden", &NetworkConfig::hidden)
      .def_readwrite("init_scale", &NetworkConfig::init_scale)
      .def_readwrite("init_density", &NetworkConfig::init_density)
      .def_readwrite("learning_rate", &NetworkConfig::learning_rate)
      .def_readwrite("activation", &NetworkConfig::activation)
      .def_readwrite("seed", &NetworkConfig::seed);

  py::class_<NetworkState>(m, "NetworkState")
      .def_readwrite("w1", &NetworkState::w1)
      .def_readwrite("w2", &NetworkState::w2)
      .def_readonly("activation", &NetworkState::activation)
      .def_property_readonly(
          "alive",
          [](const NetworkState& net) {
            std::vector<bool> mask;
            for (const auto a : net.alive) mask.push_back(a != 0);
            return mask;
          })
      .def_property_readonly("hidden", &NetworkState::hidden)
      .def_property_readonly("alive_count", &NetworkState::alive_count)
      .def("clone", [](const NetworkState& net) { return net; });

  py::class_<TrainOptions>(m, "TrainOptions")
      .def(py::init<>())
      .def_readwrite("epsilon", &TrainOptions::epsilon)
      .def_readwrite("max_epochs", &TrainOptions::max_epochs)
      .def_readwrite("learning_rate", &TrainOptions::learning_rate)
      .def_readwrite("curve_stride", &TrainOptions::curve_stride);

  py::class_<TrainReport>(m, "TrainReport")
      .def_readonly("epochs_run", &TrainReport::epochs_run)
      .def_readonly("final_loss", &TrainReport::final_loss)
      .def_readonly("converged", &TrainReport::converged)
      .def_readonly("loss_curve", &TrainReport::loss_curve);

  m.def("init_network", &init_network, py::arg("config"), py::arg("items"),
        py::arg("features"));
  m.def("forward", &forward, py::arg("net"), py::arg("x"));
  m.def("loss",
        py::overload_cast<const NetworkState&, const Dataset&>(&loss),
        py::arg("net"), py::arg("dataset"));
  m.def("gd_step", &gd_step, py::arg("net"), py::arg("dataset"),
        py::arg("rate"));
  m.def(
      "train_to_convergence",
      [](const NetworkState& net, const Dataset& ds, const TrainOptions& opts) {
        return train_to_convergence(net, ds, opts);
      },
      py::arg("net"), py::arg("dataset"), py::arg("options") = TrainOptions{});
  m.def("delete_neurons", &delete_neurons, py::arg("net"), py::arg("ids"));
  m.def("composite_map", &composite_map, py::arg("net"));
  m.def("save_checkpoint", &save_checkpoint_file, py::arg("net"), py::arg("path"));
  m.def("load_checkpoint", &load_checkpoint_file, py::arg("path"));

  py::class_<AtrophySchedule>(m, "AtrophySchedule")
      .def(py::init<>())
      .def_readwrite("deletion_seed", &AtrophySchedule::deletion_seed)
      .def_readwrite("per_step", &AtrophySchedule::per_step)
      .def_readwrite("relearn_epochs", &AtrophySchedule::relearn_epochs)
      .def_readwrite("relearn_rate", &AtrophySchedule::relearn_rate)
      .def_property(
          "relearn_frequency",
          [](const AtrophySchedule& s) { return to_string(s.relearn_frequency.rule); },
          [](AtrophySchedule& s, const py::object& rule) {
            s.relearn_frequency = frequency_from_arg(rule);
          });

  py::class_<LevelError>(m, "LevelError")
      .def_readonly("level", &LevelError::level)
      .def_readonly("sse", &LevelError::sse)
      .def_readonly("naive_sse", &LevelError::naive_sse)
      .def_readonly("percent", &LevelError::percent)
      .def("__repr__", [](const LevelError& e) {
        return "LevelError(level=" + std::to_string(e.level) +
               ", percent=" + std::to_string(e.percent) + ")";
      });

  py::class_<ClassifiedResponse>(m, "ClassifiedResponse")
      .def_readonly("cls", &ClassifiedResponse::cls)
      .def_readonly("decoded_item", &ClassifiedResponse::decoded_item);

  py::class_<StepRecord>(m, "StepRecord")
      .def_readonly("step", &StepRecord::step)
      .def_readonly("alive", &StepRecord::alive)
      .def_readonly("deleted_ids", &StepRecord::deleted_ids)
      .def_readonly("loss_pre", &StepRecord::loss_pre)
      .def_readonly("loss_post", &StepRecord::loss_post)
      .def_readonly("yhat", &StepRecord::yhat)
      .def_readonly("level_errors", &StepRecord::level_errors)
      .def_readonly("responses", &StepRecord::responses);

  py::class_<TrajectoryRecord>(m, "TrajectoryRecord")
      .def_readonly("hidden_start", &TrajectoryRecord::hidden_start)
      .def_readonly("steps", &TrajectoryRecord::steps);

  py::class_<ScheduleOptions>(m, "ScheduleOptions")
      .def(py::init<>())
      .def_readwrite("naive", &ScheduleOptions::naive);

  m.def("run_schedule", &run_schedule, py::arg("dataset"), py::arg("net"),
        py::arg("schedule"), py::arg("learning_rate"),
        py::arg("options") = ScheduleOptions{});
  m.def(
      "run_paired_conditions",
      [](const Dataset& ds, const NetworkConfig& cfg, const TrainOptions& topts,
         const AtrophySchedule& a, const AtrophySchedule& b,
         const ScheduleOptions& opts) {
        return run_paired_conditions(ds, cfg, topts, a, b, opts);
      },
      py::arg("dataset"), py::arg("network"),
      py::arg("train_options") = TrainOptions{}, py::arg("schedule_a"),
      py::arg("schedule_b"), py::arg("options") = ScheduleOptions{});

  m.def("per_level_error", &per_level_error, py::arg("yhat"), py::arg("dataset"),
        py::arg("naive") = NaiveModel::Zero);
  m.def("weighted_sse", &weighted_sse, py::arg("map"), py::arg("dataset"));
  m.def("truncated_svd_oracle", &truncated_svd_oracle, py::arg("dataset"),
        py::arg("rank"));
  m.def("oracle_gap", &oracle_gap, py::arg("net"), py::arg("dataset"),
        py::arg("rank"));
  m.def("decode_item", &decode_item, py::arg("yhat"), py::arg("dataset"));
  m.def(
      "classify_response",
      [](const Vector& yhat, int true_item, const Dataset& ds, double tau_super,
         double tau_correct) {
        return classify_response(yhat, true_item, ds, {tau_super, tau_correct});
      },
      py::arg("yhat"), py::arg("true_item"), py::arg("dataset"),
      py::arg("tau_super") = 0.2, py::arg("tau_correct") = 0.5);

  py::class_<ModeSpectrum>(m, "ModeSpectrum")
      .def_readonly("singular_values", &ModeSpectrum::singular_values)
      .def_readonly("left", &ModeSpectrum::left)
      .def_readonly("right", &ModeSpectrum::right)
      .def_readonly("level_assignment", &ModeSpectrum::level_assignment);

  m.def("mode_spectrum", &mode_spectrum, py::arg("dataset"));

  py::class_<EventRate>(m, "EventRate")
      .def_readonly("samples", &EventRate::samples)
      .def_readonly("hits", &EventRate::hits)
      .def_property_readonly("rate", &EventRate::rate);

  m.def("first_onset",
        [](const TrajectoryRecord& traj, ResponseClass cls) {
          return first_onset(traj, cls);
        },
        py::arg("trajectory"), py::arg("cls"));
  m.def("prototyping_rate", &prototyping_rate, py::arg("trajectory"),
        py::arg("dataset"));
  m.def("forced_decode_rate", &forced_decode_rate, py::arg("trajectory"),
        py::arg("dataset"), py::arg("designation"));

  m.def("parse_config", &parse_config, py::arg("text"));
  m.def("load_config", &load_config_file, py::arg("path"));
  m.def("render_config", &render_config, py::arg("config"));

  py::class_<ExperimentConfig>(m, "ExperimentConfig")
      .def(py::init<>())
      .def_readwrite("tree", &ExperimentConfig::tree)
      .def_readwrite("network", &ExperimentConfig::network)
      .def_readwrite("output_dir", &ExperimentConfig::output_dir)
      .def_readwrite("seeds", &ExperimentConfig::seeds)
      .def_readwrite("checkpoints", &ExperimentConfig::checkpoints);

  py::class_<RunFileEntry>(m, "RunFileEntry")
      .def_readonly("path", &RunFileEntry::path)
      .def_readonly("digest", &RunFileEntry::digest);

  py::class_<RunRecord>(m, "RunRecord")
      .def_readonly("id", &RunRecord::id)
      .def_readonly("seed", &RunRecord::seed)
      .def_readonly("schedule", &RunRecord::schedule)
      .def_readonly("status", &RunRecord::status)
      .def_readonly("message", &RunRecord::message)
      .def_readonly("files", &RunRecord::files);

  py::class_<RunManifest>(m, "RunManifest")
      .def_readonly("tool_version", &RunManifest::tool_version)
      .def_readonly("config_text", &RunManifest::config_text)
      .def_readonly("runs", &RunManifest::runs)
      .def_property_readonly("all_completed", &RunManifest::all_completed);

  m.def(
      "run_experiment",
      [](const ExperimentConfig& cfg, int workers, std::uint64_t seed_offset,
         const std::string& out_dir) {
        RunnerOptions opts;
        opts.workers = workers;
        opts.seed_offset = seed_offset;
        opts.output_dir_override = out_dir;
        return run_experiment(cfg, opts);
      },
      py::arg("config"), py::arg("workers") = 1, py::arg("seed_offset") = 0,
      py::arg("out_dir") = "");
}
