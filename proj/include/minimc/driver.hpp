#pragma once

// End-to-end pipeline shared by the command line tool, the Python module and
// the tests: parse, link, validate, transform, explore.

#include "minimc/explore.hpp"
#include "minimc/passes.hpp"
#include "minimc/report.hpp"

namespace minimc {

struct SourceFile {
  std::string path; // used for diagnostics and default source locations
  std::string text;
};

class ValidationError : public std::runtime_error {
public:
  explicit ValidationError(std::vector<Diagnostic> diags);
  const std::vector<Diagnostic> &diagnostics() const { return diags_; }

private:
  std::vector<Diagnostic> diags_;
};

SourceFile read_source(const std::string &path);

// Parses and links the modules, then validates the result. Throws
// ParseError, LinkError or ValidationError.
Program load_program(const std::vector<SourceFile> &sources, const PassConfig &passes = {});

struct CheckOptions {
  PassConfig passes;
  ExploreConfig explore;
  std::vector<PipelineStage> snapshot_stages;
};

struct CheckResult {
  Program linked;
  PipelineResult pipeline;
  Verdict verdict;
};

// Runs the transformation pipeline and the selected explorer. Throws
// InterceptError or NaiveCapExceeded in addition to the load errors.
CheckResult check(const std::vector<SourceFile> &sources, const CheckOptions &options = {});
CheckResult check_program(Program linked, const CheckOptions &options = {});

} // namespace minimc
