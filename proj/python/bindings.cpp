#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "simuser/dataset.hpp"
#include "simuser/error.hpp"
#include "simuser/memory_kg.hpp"
#include "simuser/metrics.hpp"
#include "simuser/persona.hpp"
#include "simuser/recommender.hpp"
#include "simuser/simulator.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using namespace simuser;

namespace {

using Row = std::tuple<std::string, std::string, int, std::int64_t>;
using TripleTuple = std::tuple<std::string, std::string, std::string>;

py::object to_py(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

std::vector<Row> rows(std::span<const Interaction> in) {
  std::vector<Row> out;
  out.reserve(in.size());
  for (const auto& r : in) out.emplace_back(r.user_id, r.item_id, r.rating, r.timestamp);
  return out;
}

py::dict dataset_dict(const fs::path& ratings, const fs::path& items) {
  const auto ds = load_dataset(ratings, items);
  py::list item_list;
  for (const auto& it : ds.items.items()) {
    py::dict d;
    d["item_id"] = it.id;
    d["title"] = it.title;
    d["genres"] = it.genres;
    item_list.append(d);
  }
  py::dict out;
  out["interactions"] = rows(ds.interactions);
  out["items"] = item_list;
  out["users"] = ds.users();
  return out;
}

py::dict split_dict(const fs::path& ratings, std::tuple<double, double, double> f) {
  const auto all = load_ratings(ratings);
  const auto s = time_split(all, {std::get<0>(f), std::get<1>(f), std::get<2>(f)});
  py::dict out;
  out["train"] = rows(s.train);
  out["validation"] = rows(s.validation);
  out["test"] = rows(s.test);
  return out;
}

GraphOverlay overlay(const std::vector<std::string>& entities, const std::vector<TripleTuple>& triples) {
  std::vector<Triple> t;
  for (const auto& [h, r, tail] : triples) t.push_back({h, r, tail});
  return GraphOverlay(std::make_shared<KnowledgeGraph>(entities, std::move(t)));
}

SessionConfig config_at(const fs::path& path, const std::optional<fs::path>& output) {
  auto cfg = SessionConfig::load(path);
  if (output) cfg.output = *output;
  return cfg;
}

nlohmann::json run_config(const fs::path& path, const std::optional<fs::path>& output) {
  const auto cfg = config_at(path, output);
  Environment env(cfg);
  require_no_leakage(env);
  const auto rec = make_recommender(cfg.recommender, env.items(), env.history(), cfg.seed, cfg.mf);
  const auto users = env.agent_users();
  const auto report = run_simulation(env, *rec, users);
  write_run_dir(cfg.output, cfg, report, {});
  std::ifstream in(cfg.output / "metrics.json");
  return nlohmann::json::parse(in);
}

nlohmann::json task_config(const fs::path& path, const std::string& name, const std::optional<fs::path>& output) {
  const auto cfg = config_at(path, output);
  Environment env(cfg);
  require_no_leakage(env);
  const auto results = run_task(env, name);
  fs::create_directories(cfg.output);
  std::ofstream(cfg.output / "config.json") << to_json(cfg).dump(2) << "\n";
  write_task_results(cfg.output, results);
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : results) out.push_back(to_json(r));
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Simulated recommender users: datasets, graph similarity, sessions and evaluation tasks.";

  // every library error, subclasses included
  py::register_exception<Error>(m, "SimuserError", PyExc_RuntimeError);

  m.def("load_dataset", &dataset_dict, py::arg("ratings"), py::arg("items"),
        "Load and validate a ratings/items pair. Rows are (user_id, item_id, rating, timestamp).");
  m.def("split", &split_dict, py::arg("ratings"), py::arg("fractions") = std::make_tuple(0.8, 0.1, 0.1),
        "Time-ordered train/validation/test split of a ratings file.");
  m.def(
      "pickiness",
      [](double average) { return std::string(pickiness_label(pickiness_level(average))); },
      py::arg("average_rating"));

  m.def(
      "path_count",
      [](const std::vector<std::string>& entities, const std::vector<TripleTuple>& triples,
         const std::string& x, const std::string& y, int max_length) {
        return path_count(overlay(entities, triples), x, y, max_length);
      },
      py::arg("entities"), py::arg("triples"), py::arg("x"), py::arg("y"), py::arg("max_length") = 3);
  m.def(
      "pathsim",
      [](const std::vector<std::string>& entities, const std::vector<TripleTuple>& triples,
         const std::string& x, const std::string& y, int max_length) {
        return pathsim(overlay(entities, triples), x, y, max_length);
      },
      py::arg("entities"), py::arg("triples"), py::arg("x"), py::arg("y"), py::arg("max_length") = 3);
  m.def(
      "blend",
      [](double item_item, double user_item, double semantic, double alpha, double embed_weight) {
        return with_semantic(blend(item_item, user_item, alpha), semantic, embed_weight);
      },
      py::arg("item_item"), py::arg("user_item"), py::arg("semantic") = 0.0, py::arg("alpha") = 0.8,
      py::arg("embed_weight") = 0.25);

  m.def(
      "engagement_metrics",
      [](const std::vector<std::tuple<std::string, std::size_t, std::size_t, std::size_t, int, double>>& agents) {
        std::vector<AgentEngagement> a;
        for (const auto& [id, shown, watched, liked, exit_page, sat] : agents) {
          a.push_back({id, shown, watched, liked, exit_page, sat});
        }
        return to_py(to_json(compute_metrics(a)));
      },
      py::arg("agents"), "Agents are (agent_id, shown, watched, liked, exit_page, satisfaction).");
  m.def(
      "classification_metrics",
      [](const std::vector<bool>& actual, const std::vector<bool>& predicted) {
        if (actual.size() != predicted.size()) throw ValidationError("actual and predicted differ in length");
        Confusion c;
        for (std::size_t i = 0; i < actual.size(); ++i) c.add(actual[i], predicted[i]);
        return to_py(to_json(classification_metrics(c)));
      },
      py::arg("actual"), py::arg("predicted"));
  m.def(
      "error_metrics",
      [](const std::vector<double>& predicted, const std::vector<double>& truth) {
        return to_py(to_json(error_metrics(predicted, truth)));
      },
      py::arg("predicted"), py::arg("truth"));
  m.def(
      "ranking_metrics",
      [](const std::vector<std::string>& ranked, const std::set<std::string>& relevant, std::size_t k) {
        return to_py(to_json(ranking_metrics(ranked, relevant, k)));
      },
      py::arg("ranked"), py::arg("relevant"), py::arg("k") = 10);

  m.def(
      "paired_t_test",
      [](const std::vector<double>& a, const std::vector<double>& b) { return to_py(to_json(paired_t_test(a, b))); },
      py::arg("a"), py::arg("b"), "Two-sided paired t-test on a[i] - b[i].");

  m.def(
      "load_config", [](const fs::path& path) { return to_py(to_json(SessionConfig::load(path))); },
      py::arg("path"));
  m.def(
      "run",
      [](const fs::path& config, std::optional<fs::path> output) {
        nlohmann::json metrics;
        {
          py::gil_scoped_release release;
          metrics = run_config(config, output);
        }
        return to_py(metrics);
      },
      py::arg("config"), py::arg("output") = py::none(),
      "Simulate every agent of the config and write the run directory; returns metrics.json.");
  m.def(
      "task",
      [](const fs::path& config, const std::string& name, std::optional<fs::path> output) {
        nlohmann::json results;
        {
          py::gil_scoped_release release;
          results = task_config(config, name, output);
        }
        return to_py(results);
      },
      py::arg("config"), py::arg("name"), py::arg("output") = py::none(),
      "Run one evaluation task and write task_results.json; returns the results.");
  m.def(
      "report",
      [](const fs::path& run_dir, const std::string& format) {
        return render_report(run_dir, parse_report_format(format));
      },
      py::arg("run_dir"), py::arg("format") = "table");
}
