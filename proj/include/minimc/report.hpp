#pragma once

// Human and machine renderings of verdicts and execution graphs.

#include "minimc/explore.hpp"

#include <optional>
#include <string>

namespace minimc {

// Error header, the racing/faulting accesses, and the witness interleaving
// with one column per thread. Init stores are hidden unless `show_init`.
std::string format_counterexample(const Verdict &v, bool show_init = false);

// Short description of one event, as used in the interleaving columns.
std::string describe_event(const Event &e, const MemoryState *mem = nullptr);

std::string dump_dot(const ExecutionGraph &g);

// Short result keyword used in machine records: OK, race, assert, oob,
// uninit, panic, unsupported.
std::string_view result_keyword(ResultKind k);
std::optional<ResultKind> parse_result_keyword(std::string_view s);

// Single-line `key=value` record, e.g.
//   result=race executions=2 blocked=0 evA=a.c:7 evB=b.rs:12
// A budget-limited run adds `incomplete=1`; unsupported verdicts carry a
// quoted `diag="..."` as the final field.
std::string machine_report(const Verdict &v);

struct MachineRecord {
  ResultKind result = ResultKind::OK;
  std::uint64_t executions = 0;
  std::uint64_t blocked = 0;
  std::optional<std::string> ev_a;
  std::optional<std::string> ev_b;
  bool incomplete = false;
  std::optional<std::string> diag;

  bool operator==(const MachineRecord &) const = default;
};

// Throws std::invalid_argument on malformed input.
MachineRecord parse_machine_report(std::string_view line);

std::string stats_line(const ExploreStats &s);

} // namespace minimc
