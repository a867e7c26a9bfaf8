#pragma once

#include "minimc/driver.hpp"

#include <string>
#include <vector>

namespace minimc::testing {

inline std::string corpus_path(const std::string &name) { return std::string(MINIMC_CORPUS_DIR) + "/" + name; }

inline SourceFile corpus_file(const std::string &name) { return read_source(corpus_path(name)); }

// Parses, links and validates a single in-memory module.
inline Program program_from(const std::string &text, const std::string &file = "test.mcir") {
  return load_program({{file, text}});
}

inline Program transformed(const std::string &text, PassConfig cfg = {}) {
  return run_pipeline(program_from(text), cfg).program;
}

inline CheckResult check_corpus(const std::vector<std::string> &names, CheckOptions opt = {}) {
  std::vector<SourceFile> files;
  for (const auto &n : names)
    files.push_back(corpus_file(n));
  return check(files, opt);
}

inline std::vector<std::uint8_t> bytes_of(const MemoryState &m, AllocId id) {
  const Allocation *a = m.find(id);
  return a ? a->bytes : std::vector<std::uint8_t>{};
}

} // namespace minimc::testing
