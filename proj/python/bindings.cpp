// Python extension module: checks MCIR programs and exposes the pipeline,
// schedule replay and machine-record helpers.

#include "minimc/driver.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace minimc;

namespace {

struct Options {
  unsigned unroll = 10;
  unsigned chunk_limit = 64;
  bool intercept = true;
  bool lower_intrinsics = true;
  bool init_undef = true;
  bool dead_alloc = true;
  bool oracle = false;
  bool keep_going = false;
  std::uint64_t max_execs = 1'000'000;

  CheckOptions to_check() const {
    CheckOptions o;
    o.passes.loop_bound = unroll;
    o.passes.memcpy_chunk_limit = chunk_limit;
    o.passes.intercept = intercept;
    o.passes.lower_intrinsics = lower_intrinsics;
    o.passes.init_undef = init_undef;
    o.passes.dead_allocs = dead_alloc;
    o.explore.algorithm = oracle ? Algorithm::Naive : Algorithm::Dpor;
    o.explore.stop_mode = keep_going ? StopMode::KeepGoing : StopMode::FirstError;
    o.explore.max_executions = max_execs;
    return o;
  }
};

std::vector<SourceFile> to_sources(const std::vector<std::pair<std::string, std::string>> &named) {
  std::vector<SourceFile> out;
  for (const auto &[path, text] : named)
    out.push_back({path, text});
  return out;
}

std::vector<SourceFile> read_all(const std::vector<std::string> &paths) {
  std::vector<SourceFile> out;
  for (const auto &p : paths)
    out.push_back(read_source(p));
  return out;
}

std::optional<std::string> site(const std::optional<Event> &e) {
  if (!e)
    return std::nullopt;
  return e->src.str();
}

py::dict record_dict(const MachineRecord &r) {
  py::dict d;
  d["result"] = std::string(result_keyword(r.result));
  d["executions"] = r.executions;
  d["blocked"] = r.blocked;
  d["evA"] = r.ev_a;
  d["evB"] = r.ev_b;
  d["incomplete"] = r.incomplete;
  d["diag"] = r.diag;
  return d;
}

} // namespace

PYBIND11_MODULE(_minimc, m) {
  m.doc() = "Stateless model checker for MCIR programs";

  // Later registrations are tried first, so the specific errors win over the
  // catch-all base.
  auto &base = py::register_local_exception<std::runtime_error>(m, "MinimcError");
  py::register_local_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_local_exception<LinkError>(m, "LinkError", base.ptr());
  py::register_local_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_local_exception<InterceptError>(m, "InterceptError", base.ptr());
  py::register_local_exception<NaiveCapExceeded>(m, "OracleCapExceeded", base.ptr());

  py::class_<Options>(m, "Options")
      .def(py::init<>())
      .def_readwrite("unroll", &Options::unroll)
      .def_readwrite("chunk_limit", &Options::chunk_limit)
      .def_readwrite("intercept", &Options::intercept)
      .def_readwrite("lower_intrinsics", &Options::lower_intrinsics)
      .def_readwrite("init_undef", &Options::init_undef)
      .def_readwrite("dead_alloc", &Options::dead_alloc)
      .def_readwrite("oracle", &Options::oracle)
      .def_readwrite("keep_going", &Options::keep_going)
      .def_readwrite("max_execs", &Options::max_execs);

  py::class_<Verdict>(m, "Verdict")
      .def_property_readonly("result", [](const Verdict &v) { return std::string(result_keyword(v.result)); })
      .def_property_readonly("kind", [](const Verdict &v) { return std::string(to_string(v.result)); })
      .def_property_readonly("ok", [](const Verdict &v) { return v.result == ResultKind::OK; })
      .def_property_readonly("diagnostic", [](const Verdict &v) { return v.diagnostic; })
      .def_property_readonly("event_a", [](const Verdict &v) { return site(v.event_a); })
      .def_property_readonly("event_b", [](const Verdict &v) { return site(v.event_b); })
      .def_property_readonly("executions", [](const Verdict &v) { return v.stats.executions_explored; })
      .def_property_readonly("blocked", [](const Verdict &v) { return v.stats.blocked_explorations; })
      .def_property_readonly("max_events", [](const Verdict &v) { return v.stats.events_max; })
      .def_property_readonly("bound_exceeded", [](const Verdict &v) { return v.stats.bound_exceeded; })
      .def_property_readonly("incomplete", [](const Verdict &v) { return v.stats.budget_exhausted; })
      .def_property_readonly("schedule",
                             [](const Verdict &v) {
                               return v.witness ? v.witness->schedule : std::vector<Tid>{};
                             })
      .def_property_readonly("errors",
                             [](const Verdict &v) {
                               std::vector<std::pair<std::string, std::string>> out;
                               for (const auto &e : v.errors)
                                 out.emplace_back(result_keyword(e.kind), e.diagnostic);
                               return out;
                             })
      .def("counterexample", &format_counterexample, py::arg("show_init") = false)
      .def("machine_record", &machine_report)
      .def("dot",
           [](const Verdict &v) -> std::optional<std::string> {
             if (!v.witness)
               return std::nullopt;
             return dump_dot(build_graph(*v.witness));
           })
      .def("__repr__", [](const Verdict &v) { return "<Verdict " + machine_report(v) + ">"; });

  m.def(
      "check_files", [](const std::vector<std::string> &paths, const Options &o) {
        return check(read_all(paths), o.to_check()).verdict;
      },
      py::arg("paths"), py::arg("options") = Options{}, "Link and verify MCIR files.");

  m.def(
      "check_sources",
      [](const std::vector<std::pair<std::string, std::string>> &sources, const Options &o) {
        return check(to_sources(sources), o.to_check()).verdict;
      },
      py::arg("sources"), py::arg("options") = Options{}, "Verify in-memory (name, text) modules.");

  m.def(
      "normalize", [](const std::string &text, const std::string &file) { return print_module(parse_module(text, file)); },
      py::arg("text"), py::arg("file") = "<input>", "Parse one module and print it back in canonical form.");

  m.def(
      "transform",
      [](const std::vector<std::pair<std::string, std::string>> &sources, const std::string &stage,
         const Options &o) {
        auto st = parse_stage(stage);
        if (!st)
          throw py::value_error("unknown stage '" + stage + "'");
        CheckOptions c = o.to_check();
        Program linked = load_program(to_sources(sources), c.passes);
        return print_program(run_pipeline(linked, c.passes, {*st}).snapshots.at(*st));
      },
      py::arg("sources"), py::arg("stage") = "dead_alloc", py::arg("options") = Options{},
      "Run the pass pipeline and print the program after the given stage.");

  m.def(
      "replay",
      [](const std::vector<std::pair<std::string, std::string>> &sources, const std::vector<Tid> &schedule,
         const Options &o, bool show_init) {
        CheckOptions c = o.to_check();
        Program p = run_pipeline(load_program(to_sources(sources), c.passes), c.passes).program;
        return format_trace(run_schedule(p, schedule), show_init);
      },
      py::arg("sources"), py::arg("schedule"), py::arg("options") = Options{}, py::arg("show_init") = false,
      "Execute one schedule and return the event trace.");

  m.def(
      "parse_machine_record", [](const std::string &line) { return record_dict(parse_machine_report(line)); },
      py::arg("line"));
  m.def("stages", [] {
    std::vector<std::string> out;
    for (int i = 0; i <= static_cast<int>(PipelineStage::DeadAlloc); ++i)
      out.emplace_back(to_string(static_cast<PipelineStage>(i)));
    return out;
  });
}
