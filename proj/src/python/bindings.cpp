#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "json.hpp"
#include "npmtune/error.hpp"
#include "npmtune/evaluation.hpp"
#include "npmtune/metrics.hpp"
#include "npmtune/pass_registry.hpp"
#include "npmtune/pipeline.hpp"
#include "npmtune/refinement.hpp"
#include "npmtune/search.hpp"
#include "npmtune/synergy.hpp"

namespace py = pybind11;
using namespace npmtune;

namespace {

py::object from_json(const std::string& text) {
  return py::module_::import("json").attr("loads")(text);
}

std::string to_json(const py::object& value) {
  return py::module_::import("json").attr("dumps")(value).cast<std::string>();
}

PassLevel level_from(const std::string& text) {
  if (auto level = parse_level(text)) return *level;
  throw Error(ErrorCode::ParseError, "unknown level '" + text + "'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Pipeline grammar, synergy mining, structure-aware search and refinement";

  py::register_exception<Error>(m, "NpmtuneError");

  py::class_<PassRegistry>(m, "PassRegistry")
      .def(py::init<>())
      .def("add",
           [](PassRegistry& r, const std::string& name, const std::string& level) {
             if (level == "any") {
               r.add({name, PassLevel::Module, true});
             } else {
               r.add({name, level_from(level), false});
             }
           },
           py::arg("name"), py::arg("level"))
      .def("level", [](const PassRegistry& r, const std::string& name) {
        const PassInfo& info = r.at(name);
        return info.polymorphic ? std::string("any") : std::string(to_string(info.level));
      })
      .def("names", [](const PassRegistry& r) {
        std::vector<std::string> out;
        for (const PassInfo& info : r.entries()) out.push_back(info.name);
        return out;
      })
      .def("serialize", &PassRegistry::serialize)
      .def("content_hash", &PassRegistry::content_hash)
      .def("__len__", &PassRegistry::size)
      .def("__contains__",
           [](const PassRegistry& r, const std::string& name) { return r.find(name) != nullptr; });

  m.def("default_registry", [] { return default_registry(); });
  m.def("load_registry", [](const std::string& text) { return load_registry(text); });
  m.def("load_registry_file", &load_registry_file);

  m.def("format_pipeline",
        [](const std::string& text, const PassRegistry& registry) {
          return print_pipeline(parse_pipeline(text, registry));
        },
        py::arg("pipeline"), py::arg("registry"));

  m.def("validate_pipeline",
        [](const std::string& text, const PassRegistry& registry) -> py::tuple {
          try {
            const ValidationReport report = validate(parse_pipeline(text, registry), registry);
            return py::make_tuple(report.ok(), report.to_string());
          } catch (const Error& e) {
            return py::make_tuple(false, std::string(e.what()));
          }
        },
        py::arg("pipeline"), py::arg("registry"));

  m.def("leaf_sequence",
        [](const std::string& text, const PassRegistry& registry) {
          std::vector<std::pair<std::string, std::string>> out;
          for (const TypedPass& p : leaf_sequence(parse_pipeline(text, registry))) {
            out.emplace_back(p.name, std::string(to_string(p.level)));
          }
          return out;
        },
        py::arg("pipeline"), py::arg("registry"));

  m.def("schedule",
        [](const std::string& text, const PassRegistry& registry, const std::string& mock_json) {
          std::vector<std::pair<std::string, std::string>> out;
          for (const ScheduleEvent& e :
               schedule_of(parse_pipeline(text, registry), parse_mock_program(mock_json))) {
            out.emplace_back(e.pass, e.function);
          }
          return out;
        },
        py::arg("pipeline"), py::arg("registry"), py::arg("mock_json"));

  py::class_<MockBackend>(m, "MockBackend")
      .def(py::init<>())
      .def("add_file",
           [](MockBackend& b, const std::string& path) { b.add(path, load_mock_program(path)); })
      .def("add_json", [](MockBackend& b, const std::string& id,
                          const std::string& text) { b.add(id, parse_mock_program(text)); })
      .def("programs", &MockBackend::programs)
      .def("original_count",
           [](const MockBackend& b, const std::string& id) {
             return b.original_count(id).instruction_count;
           })
      .def("evaluate",
           [](const MockBackend& b, const std::string& id, const std::string& text,
              const PassRegistry& registry) -> py::object {
             const EvaluationResult r = evaluate({id, parse_pipeline(text, registry)}, b, registry);
             if (!r.ok()) return py::none();
             return py::int_(r.instruction_count);
           },
           py::arg("program"), py::arg("pipeline"), py::arg("registry"));

  m.def("mine",
        [](const std::vector<std::string>& programs, const PassRegistry& registry,
           const MockBackend& backend, unsigned parallel) {
          MiningOptions options;
          options.parallel = parallel;
          py::gil_scoped_release release;
          return graph_to_json(mine_synergies(programs, registry, backend, options));
        },
        py::arg("programs"), py::arg("registry"), py::arg("backend"), py::arg("parallel") = 1,
        "Returns the synergy graph as a JSON string");

  m.def("search",
        [](const std::string& program, const std::string& graph_json, const PassRegistry& registry,
           const MockBackend& backend, std::size_t population, std::size_t generations,
           std::size_t max_length, std::uint64_t seed, unsigned parallel) {
          SearchConfig config;
          config.population_size = population;
          config.generations = generations;
          config.max_sequence_length = max_length;
          config.seed = seed;
          config.parallel = parallel;
          const SynergyGraph graph = graph_json.empty() ? SynergyGraph{} : graph_from_json(graph_json);
          SearchResult result;
          {
            py::gil_scoped_release release;
            result = run_search(program, graph, registry, backend, config);
          }
          py::dict out;
          out["best_pipeline"] = print_pipeline(result.best.forest);
          out["best_fitness"] = *result.best.fitness;
          out["original_ic"] = result.original_ic;
          out["evaluations"] = result.evaluations;
          out["log"] = search_log_jsonl(result.log);
          return out;
        },
        py::arg("program"), py::arg("graph_json"), py::arg("registry"), py::arg("backend"),
        py::arg("population") = 50, py::arg("generations") = 20, py::arg("max_length") = 24,
        py::arg("seed") = 0, py::arg("parallel") = 1);

  m.def("refine",
        [](const std::string& program, const std::string& pipeline, const PassRegistry& registry,
           const MockBackend& backend, std::uint64_t seed) {
          RefineConfig config;
          config.seed = seed;
          const PipelineForest forest = parse_pipeline(pipeline, registry);
          std::string report;
          {
            py::gil_scoped_release release;
            report = refine_report_json(refine(forest, program, backend, config));
          }
          return from_json(report);
        },
        py::arg("program"), py::arg("pipeline"), py::arg("registry"), py::arg("backend"),
        py::arg("seed") = 0);

  m.def("overoz", &overoz, py::arg("ic_oz"), py::arg("ic_tuned"));

  m.def("aggregate",
        [](const py::list& rows) {
          return from_json(report_json(aggregate(parse_results_json(to_json(rows)))));
        },
        py::arg("results"), "rows of {program, group, ic_oz, ic_tuned}");
}
