// minimc: model checker driver for MCIR programs.
//
// Exit codes: 0 verified, 1 bug found, 2 usage/parse/link/validation error,
// 3 unsupported construct.

#include "minimc/driver.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

using namespace minimc;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitBug = 1;
constexpr int kExitUsage = 2;
constexpr int kExitUnsupported = 3;

std::vector<Tid> read_schedule(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot open schedule file " + path);
  std::vector<Tid> out;
  std::string line;
  while (std::getline(in, line)) {
    if (auto h = line.find('#'); h != std::string::npos)
      line.resize(h);
    for (char &c : line)
      if (c == ',')
        c = ' ';
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) {
      std::size_t used = 0;
      int t = -1;
      try {
        t = std::stoi(tok, &used);
      } catch (const std::exception &) {
        used = 0;
      }
      if (used != tok.size() || t < 0)
        throw std::runtime_error("schedule file " + path + ": bad thread id '" + tok + "'");
      out.push_back(t);
    }
  }
  return out;
}

void write_file(const std::string &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::runtime_error("cannot write " + path);
  out << text;
}

int exit_code(ResultKind r) {
  switch (r) {
  case ResultKind::OK: return kExitOk;
  case ResultKind::Unsupported: return kExitUnsupported;
  default: return kExitBug;
  }
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Stateless model checker for MCIR programs"};
  app.set_version_flag("--version", "minimc 0.1.0");

  std::vector<std::string> inputs;
  CheckOptions opt;
  bool no_intercept = false, no_lower = false, no_init_undef = false, no_dead_alloc = false;
  bool oracle = false, keep_going = false, stats = false, show_init = false;
  std::string dump_stage, dot_path, trace_path, machine_out;
  std::uint64_t max_execs = opt.explore.max_executions;

  app.add_option("inputs", inputs, "MCIR modules to link")->required()->check(CLI::ExistingFile);
  app.add_option("--unroll", opt.passes.loop_bound, "Loop iteration bound")->capture_default_str();
  app.add_option("--chunk-limit", opt.passes.memcpy_chunk_limit, "Largest intrinsic length to lower (bytes)")
      ->capture_default_str();
  app.add_flag("--no-intercept", no_intercept, "Do not rewrite threading-library calls");
  app.add_flag("--no-lower-intrinsics", no_lower, "Keep memcpy/memmove/memset unexpanded");
  app.add_flag("--no-init-undef", no_init_undef, "Leave stack allocations uninitialized");
  app.add_flag("--no-dead-alloc", no_dead_alloc, "Keep allocations that are never used");
  app.add_flag("--oracle", oracle, "Enumerate every interleaving instead of running DPOR");
  app.add_option("--max-execs", max_execs, "Stop after this many executions")->check(CLI::PositiveNumber);
  app.add_flag("--keep-going", keep_going, "Collect every distinct error instead of stopping at the first");
  app.add_flag("--stats", stats, "Print exploration statistics");
  app.add_option("--dump-ir", dump_stage,
                 "Print the IR after a stage: linked, intercept, bound_loops, lower_intrinsics, init_undef, dead_alloc");
  app.add_option("--dot", dot_path, "Write the witness execution graph in DOT format");
  app.add_option("--trace", trace_path, "Replay the schedule in this file and print its trace")
      ->check(CLI::ExistingFile);
  app.add_flag("--show-init", show_init, "Show initialization stores in traces");
  app.add_option("--machine-out", machine_out, "Write the machine-readable record to this file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  opt.passes.intercept = !no_intercept;
  opt.passes.lower_intrinsics = !no_lower;
  opt.passes.init_undef = !no_init_undef;
  opt.passes.dead_allocs = !no_dead_alloc;
  opt.explore.algorithm = oracle ? Algorithm::Naive : Algorithm::Dpor;
  opt.explore.stop_mode = keep_going ? StopMode::KeepGoing : StopMode::FirstError;
  opt.explore.max_executions = max_execs;
  std::optional<PipelineStage> stage;
  if (!dump_stage.empty()) {
    stage = parse_stage(dump_stage);
    if (!stage) {
      std::cerr << "minimc: unknown stage '" << dump_stage << "'\n";
      return kExitUsage;
    }
    opt.snapshot_stages.push_back(*stage);
  }

  try {
    std::vector<SourceFile> sources;
    for (const auto &p : inputs)
      sources.push_back(read_source(p));
    Program linked = load_program(sources, opt.passes);

    if (!trace_path.empty()) {
      opt.passes.check();
      PipelineResult pr = run_pipeline(linked, opt.passes, opt.snapshot_stages);
      if (stage)
        std::cout << print_program(pr.snapshots.at(*stage));
      if (auto diag = unsupported_construct(pr.program)) {
        std::cerr << "minimc: " << *diag << "\n";
        return kExitUnsupported;
      }
      Trace t = run_schedule(pr.program, read_schedule(trace_path),
                             {opt.explore.max_call_depth, opt.explore.max_threads});
      std::cout << format_trace(t, show_init);
      if (!dot_path.empty())
        write_file(dot_path, dump_dot(build_graph(t)));
      return t.outcome == Outcome::Faulted ? kExitBug : kExitOk;
    }

    CheckResult r = check_program(std::move(linked), opt);
    for (const auto &d : r.pipeline.report.diagnostics)
      std::cerr << "minimc: warning: " << d.str() << "\n";
    if (stage)
      std::cout << print_program(r.pipeline.snapshots.at(*stage));

    const Verdict &v = r.verdict;
    if (v.result == ResultKind::Unsupported)
      std::cerr << "minimc: unsupported: " << v.diagnostic << "\n";
    if (v.result == ResultKind::OK) {
      std::cout << "verdict: OK";
      if (v.stats.budget_exhausted)
        std::cout << " (execution budget exhausted, exploration incomplete)";
      if (v.stats.bound_exceeded)
        std::cout << " (some executions were cut at the loop bound)";
      std::cout << "\n";
    } else {
      std::cout << format_counterexample(v, show_init);
      for (const auto &e : v.errors)
        if (keep_going && e.diagnostic != v.diagnostic)
          std::cout << "also: " << to_string(e.kind) << ": " << e.diagnostic << "\n";
    }
    if (!dot_path.empty()) {
      Trace t = v.witness ? *v.witness : run_schedule(r.pipeline.program, {});
      write_file(dot_path, dump_dot(build_graph(t)));
    }
    if (stats)
      std::cout << stats_line(v.stats) << "\n";
    std::string record = machine_report(v);
    if (!machine_out.empty())
      write_file(machine_out, record + "\n");
    std::cout << record << "\n";
    return exit_code(v.result);
  } catch (const ParseError &e) {
    std::cerr << "minimc: " << e.what() << "\n";
  } catch (const LinkError &e) {
    std::cerr << "minimc: link error: " << e.what() << "\n";
  } catch (const ValidationError &e) {
    std::cerr << "minimc: invalid program:\n" << e.what() << "\n";
  } catch (const InterceptError &e) {
    std::cerr << "minimc: " << e.what() << "\n";
  } catch (const NaiveCapExceeded &e) {
    std::cerr << "minimc: oracle refused: " << e.what() << "\n";
  } catch (const std::exception &e) {
    std::cerr << "minimc: " << e.what() << "\n";
  }
  return kExitUsage;
}
