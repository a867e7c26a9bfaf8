#pragma once

// IR-to-IR transformations run between linking and exploration.

#include "minimc/ir.hpp"

#include <map>
#include <string>
#include <vector>

namespace minimc {

enum class ThreadIntrinsic { Spawn, Join };

struct PassConfig {
  unsigned loop_bound = 10;
  unsigned memcpy_chunk_limit = 64;
  bool intercept = true;
  bool lower_intrinsics = true;
  bool init_undef = true;
  bool bound_loops = true;
  bool dead_allocs = true;
  std::map<std::string, ThreadIntrinsic> interception_table = default_interception_table();

  static std::map<std::string, ThreadIntrinsic> default_interception_table();

  // Throws std::invalid_argument when a bound is out of range.
  void check() const;
  std::vector<std::string> threading_symbols() const;
};

struct PassReport {
  unsigned calls_intercepted = 0;
  unsigned intrinsics_lowered = 0;
  unsigned undef_stores_inserted = 0;
  unsigned loops_bounded = 0;
  unsigned allocas_removed = 0;
  std::vector<Diagnostic> diagnostics;

  PassReport &operator+=(const PassReport &o);
  std::string summary() const;
};

class InterceptError : public std::runtime_error {
public:
  InterceptError(SrcLoc loc, const std::string &msg)
      : std::runtime_error(loc.str() + ": " + msg), loc_(std::move(loc)) {}
  const SrcLoc &loc() const { return loc_; }

private:
  SrcLoc loc_;
};

// Rewrites extern calls to threading-library symbols into spawn/join.
Program intercept_threads(Program program, const std::map<std::string, ThreadIntrinsic> &table,
                          PassReport *report = nullptr);
inline Program intercept_threads(Program program) {
  return intercept_threads(std::move(program), PassConfig::default_interception_table());
}

// Expands constant-length memcpy/memmove/memset into typed loads and stores.
Program lower_intrinsics(Program program, unsigned chunk_limit, PassReport &report);

// Writes undef over every stack allocation right after it is created.
Program init_undef(Program program, PassReport &report);

// Guards every back-edge with a per-loop iteration counter.
Program bound_loops(Program program, unsigned bound, PassReport &report);

// Removes allocations that only ever receive initialization stores.
Program eliminate_dead_allocs(Program program, PassReport &report);

enum class PipelineStage { Linked, Intercept, BoundLoops, LowerIntrinsics, InitUndef, DeadAlloc };

std::string_view to_string(PipelineStage s);
std::optional<PipelineStage> parse_stage(std::string_view s);

struct PipelineResult {
  Program program;
  PassReport report;
  std::map<PipelineStage, Program> snapshots; // filled only for requested stages
};

// Fixed order: intercept, bound loops, lower intrinsics, init undef, dead allocs.
PipelineResult run_pipeline(Program program, const PassConfig &config,
                            const std::vector<PipelineStage> &snapshot_stages = {});

} // namespace minimc
