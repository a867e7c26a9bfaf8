#pragma once

// Verification stage: execution graphs, happens-before, race detection and
// systematic exploration of interleavings.

#include "minimc/exec.hpp"

#include <chrono>
#include <limits>
#include <set>

namespace minimc {

// ---------------------------------------------------------------------------
// Vector clocks

class VectorClock {
public:
  VectorClock() = default;
  explicit VectorClock(std::size_t threads) : c_(threads, 0) {}

  unsigned get(Tid t) const {
    return static_cast<std::size_t>(t) < c_.size() ? c_[static_cast<std::size_t>(t)] : 0;
  }
  void set(Tid t, unsigned v) {
    if (static_cast<std::size_t>(t) >= c_.size())
      c_.resize(static_cast<std::size_t>(t) + 1, 0);
    c_[static_cast<std::size_t>(t)] = v;
  }
  void join(const VectorClock &o) {
    if (o.c_.size() > c_.size())
      c_.resize(o.c_.size(), 0);
    for (std::size_t i = 0; i < o.c_.size(); ++i)
      c_[i] = std::max(c_[i], o.c_[i]);
  }
  // Component-wise <=.
  bool leq(const VectorClock &o) const {
    for (std::size_t i = 0; i < c_.size(); ++i)
      if (c_[i] > o.get(static_cast<Tid>(i)))
        return false;
    return true;
  }
  bool operator==(const VectorClock &o) const { return leq(o) && o.leq(*this); }
  std::size_t size() const { return c_.size(); }

private:
  std::vector<unsigned> c_;
};

// Clock of every event in trace order. An event's own component holds its
// sequence number plus one, so e1 happens before e2 iff
// clock(e1)[tid(e1)] <= clock(e2)[tid(e1)].
std::vector<VectorClock> happens_before(const Trace &trace);
bool ordered_before(const std::vector<VectorClock> &clocks, const Trace &trace, std::size_t a, std::size_t b);

// ---------------------------------------------------------------------------
// Execution graphs

constexpr std::size_t kInitEvent = std::numeric_limits<std::size_t>::max();

struct ReadsFrom {
  std::size_t write = kInitEvent; // event index, or kInitEvent for an initializer
  std::size_t read = 0;
  std::int64_t first_byte = 0;    // byte range within the read location
  std::int64_t last_byte = 0;

  bool operator==(const ReadsFrom &) const = default;
};

struct ExecutionGraph {
  std::vector<Event> events;
  std::vector<std::pair<std::size_t, std::size_t>> po; // immediate program order
  std::vector<ReadsFrom> rf;
  std::vector<std::pair<std::size_t, std::size_t>> co; // immediate coherence, may start at kInitEvent
  std::vector<std::pair<std::size_t, std::size_t>> tc; // create -> child start
  std::vector<std::pair<std::size_t, std::size_t>> tj; // child end -> join
  MemoryState memory;
  Outcome outcome = Outcome::Running;
  std::optional<Fault> fault;
};

ExecutionGraph build_graph(const Trace &trace);
bool is_acyclic(const ExecutionGraph &g);

// ---------------------------------------------------------------------------
// Race detection

struct Race {
  std::size_t first = 0;  // trace index of the earlier access
  std::size_t second = 0; // trace index of the later access
};

// HB-unordered conflicting access pairs, at most one per pair of source
// locations, ordered by the position of the later access.
std::vector<Race> detect_races(const Trace &trace);

// ---------------------------------------------------------------------------
// Exploration

enum class ResultKind : std::uint8_t { OK, DataRace, AssertViolation, OutOfBounds, UninitializedRead, Panic, Unsupported };

std::string_view to_string(ResultKind k);

struct ErrorRecord {
  ResultKind kind = ResultKind::OK;
  Trace witness;
  std::optional<Event> event_a; // race: earlier access; faults: faulting event if any
  std::optional<Event> event_b; // race: later access
  std::string diagnostic;
};

struct ExploreStats {
  std::uint64_t executions_explored = 0;
  std::uint64_t blocked_explorations = 0;
  std::uint64_t events_max = 0;
  bool bound_exceeded = false;
  bool budget_exhausted = false;
  double wall_time_s = 0.0;
};

struct Verdict {
  ResultKind result = ResultKind::OK;
  std::optional<Trace> witness;
  std::optional<Event> event_a;
  std::optional<Event> event_b;
  std::string diagnostic;
  std::vector<ErrorRecord> errors; // every distinct error site (keep-going mode)
  ExploreStats stats;
  std::set<std::string> classes;   // canonical forms, when requested
  std::uint64_t class_count = 0;   // naive enumeration only
};

enum class Algorithm { Dpor, Naive };
enum class StopMode { FirstError, KeepGoing };

struct ExploreConfig {
  Algorithm algorithm = Algorithm::Dpor;
  StopMode stop_mode = StopMode::FirstError;
  std::uint64_t max_executions = 1'000'000;
  unsigned max_threads = 16;
  unsigned max_call_depth = 64;
  std::size_t naive_event_cap = 24;
  bool collect_classes = false;
};

class NaiveCapExceeded : public std::runtime_error {
public:
  explicit NaiveCapExceeded(std::size_t cap)
      : std::runtime_error("program exceeds the enumeration cap of " + std::to_string(cap) + " events") {}
};

// Source-DPOR with sleep sets. Unsupported programs (unlowered intrinsics,
// unresolved externs) are rejected before any execution.
Verdict explore(const Program &program, const ExploreConfig &config = {});

// Exhaustive enumeration of every interleaving; counts Mazurkiewicz classes
// through canonical forms. Throws NaiveCapExceeded for large programs.
Verdict explore_naive(const Program &program, const ExploreConfig &config = {});

// Foata normal form of the trace's dependency graph; equal iff the traces are
// equivalent up to swapping adjacent independent events.
std::string canonical_form(const Trace &trace);

// Conflict relation used by both explorers.
bool dependent(const Event &a, const Event &b);

// Pre-exploration check for constructs the verifier cannot execute.
std::optional<std::string> unsupported_construct(const Program &program);

} // namespace minimc
