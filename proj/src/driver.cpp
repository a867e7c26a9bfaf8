#include "minimc/driver.hpp"

#include <fstream>
#include <sstream>

namespace minimc {

namespace {

std::string join_diags(const std::vector<Diagnostic> &d) {
  std::string s;
  for (const auto &x : d)
    s += (s.empty() ? "" : "\n") + x.str();
  return s;
}

} // namespace

ValidationError::ValidationError(std::vector<Diagnostic> diags)
    : std::runtime_error(join_diags(diags)), diags_(std::move(diags)) {}

SourceFile read_source(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return {path, ss.str()};
}

Program load_program(const std::vector<SourceFile> &sources, const PassConfig &passes) {
  std::vector<NamedModule> modules;
  for (const auto &s : sources)
    modules.push_back({s.path, parse_module(s.text, s.path)});
  Program p = link(modules, passes.threading_symbols());
  if (auto diags = validate(p); !diags.empty())
    throw ValidationError(std::move(diags));
  return p;
}

CheckResult check_program(Program linked, const CheckOptions &options) {
  options.passes.check();
  CheckResult r;
  r.linked = std::move(linked);
  r.pipeline = run_pipeline(r.linked, options.passes, options.snapshot_stages);
  r.verdict = options.explore.algorithm == Algorithm::Naive ? explore_naive(r.pipeline.program, options.explore)
                                                            : explore(r.pipeline.program, options.explore);
  return r;
}

CheckResult check(const std::vector<SourceFile> &sources, const CheckOptions &options) {
  return check_program(load_program(sources, options.passes), options);
}

} // namespace minimc
