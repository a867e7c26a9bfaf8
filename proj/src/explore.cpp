#include "minimc/explore.hpp"

#include <algorithm>
#include <map>

namespace minimc {

namespace {

constexpr std::string_view kResultNames[] = {"OK", "DataRace", "AssertViolation", "OutOfBounds",
                                             "UninitializedRead", "Panic", "Unsupported"};

// Lower rank wins when several error kinds are found in keep-going mode.
int rank(ResultKind k) {
  switch (k) {
  case ResultKind::DataRace: return 0;
  case ResultKind::AssertViolation: return 1;
  case ResultKind::OutOfBounds: return 2;
  case ResultKind::UninitializedRead: return 3;
  case ResultKind::Panic: return 4;
  case ResultKind::Unsupported: return 5;
  case ResultKind::OK: return 6;
  }
  return 6;
}

ResultKind result_of(FaultKind k) {
  switch (k) {
  case FaultKind::OutOfBounds: return ResultKind::OutOfBounds;
  case FaultKind::UninitializedRead: return ResultKind::UninitializedRead;
  case FaultKind::AssertViolation: return ResultKind::AssertViolation;
  case FaultKind::Panic: return ResultKind::Panic;
  case FaultKind::CallDepthExceeded:
  case FaultKind::Unsupported: return ResultKind::Unsupported;
  }
  return ResultKind::Unsupported;
}

// Classifies one finished execution. Races take priority over a fault.
std::optional<ErrorRecord> classify(const Trace &t) {
  auto races = detect_races(t);
  if (!races.empty()) {
    ErrorRecord r;
    r.kind = ResultKind::DataRace;
    r.event_a = t.events[races.front().first];
    r.event_b = t.events[races.front().second];
    r.witness = t;
    r.diagnostic = "data race between " + r.event_a->src.str() + " and " + r.event_b->src.str();
    return r;
  }
  if (t.outcome != Outcome::Faulted || !t.fault)
    return std::nullopt;
  ErrorRecord r;
  r.kind = result_of(t.fault->kind);
  r.witness = t;
  r.diagnostic = t.fault->message;
  if (t.schedule.size() == t.events.size() && !t.events.empty() && t.events.back().tid == t.fault->tid)
    r.event_a = t.events.back();
  if (t.fault->loc && (r.kind == ResultKind::OutOfBounds || r.kind == ResultKind::UninitializedRead)) {
    Event e;
    e.tid = t.fault->tid;
    e.kind = EventKind::Read;
    e.loc = *t.fault->loc;
    e.src = t.fault->src;
    r.event_a = e;
  }
  return r;
}

std::string site_of(const ErrorRecord &r) {
  std::string s(kResultNames[static_cast<std::size_t>(r.kind)]);
  if (r.event_a)
    s += "|" + r.event_a->src.str();
  if (r.event_b)
    s += "|" + r.event_b->src.str();
  if (!r.event_a && r.witness.fault)
    s += "|" + r.witness.fault->src.str();
  return s;
}

// Shared bookkeeping of finished executions for both explorers.
class Collector {
public:
  Collector(const ExploreConfig &cfg, Verdict &v) : cfg_(cfg), v_(v) {}

  // Returns true when exploration must stop.
  bool finish(const Trace &t) {
    ++v_.stats.executions_explored;
    v_.stats.events_max = std::max<std::uint64_t>(v_.stats.events_max, t.events.size());
    if (t.outcome == Outcome::BoundExceeded)
      v_.stats.bound_exceeded = true;
    if (cfg_.collect_classes || cfg_.algorithm == Algorithm::Naive)
      v_.classes.insert(canonical_form(t));
    if (auto err = classify(t)) {
      if (sites_.insert(site_of(*err)).second)
        v_.errors.push_back(*err);
      if (cfg_.stop_mode == StopMode::FirstError)
        return true;
    }
    if (v_.stats.executions_explored >= cfg_.max_executions) {
      v_.stats.budget_exhausted = true;
      return true;
    }
    return false;
  }

  void conclude() {
    const ErrorRecord *best = nullptr;
    for (const auto &e : v_.errors)
      if (!best || rank(e.kind) < rank(best->kind))
        best = &e;
    if (best) {
      v_.result = best->kind;
      v_.witness = best->witness;
      v_.event_a = best->event_a;
      v_.event_b = best->event_b;
      v_.diagnostic = best->diagnostic;
    }
    if (cfg_.algorithm == Algorithm::Naive)
      v_.class_count = v_.classes.size();
  }

private:
  const ExploreConfig &cfg_;
  Verdict &v_;
  std::set<std::string> sites_;
};

ExecConfig exec_config(const ExploreConfig &c) { return {c.max_call_depth, c.max_threads}; }

// One transition as seen by the explorer: the event it emits (if any) and
// whether it ends the execution abnormally. Terminating transitions conflict
// with every other thread, since they disable all of them.
struct Step {
  Tid tid = 0;
  std::optional<Event> event;
  bool terminal = false;
};

Step observe(const Interpreter &after, Tid t, std::optional<Event> e) {
  return {t, std::move(e), after.done() && after.outcome() != Outcome::Completed};
}

bool conflict(const Step &a, const Step &b) {
  if (a.tid == b.tid || a.terminal || b.terminal)
    return true;
  return a.event && b.event && dependent(*a.event, *b.event);
}

// Conflicts whose order cannot be flipped: spawn before child start, child
// end before join.
bool reversible(const Step &a, const Step &b) {
  if (a.terminal || !a.event || !b.event)
    return !a.terminal;
  auto fixed = [](const Event &x, const Event &y) {
    return (x.kind == EventKind::ThreadCreate && y.kind == EventKind::ThreadStart && x.other == y.tid) ||
           (x.kind == EventKind::ThreadEnd && y.kind == EventKind::ThreadJoin && y.other == x.tid);
  };
  return !fixed(*a.event, *b.event);
}

class Dpor {
public:
  Dpor(const Program &prog, const ExploreConfig &cfg, Verdict &v) : prog_(prog), cfg_(cfg), col_(cfg, v), v_(v) {}

  void run() {
    Interpreter root(prog_, exec_config(cfg_));
    explore(root, {});
    col_.conclude();
  }

private:
  struct Node {
    std::set<Tid> backtrack;
  };
  struct Done {
    Step step;
    VectorClock clock;
    unsigned own = 0; // position of the step within its thread, from 1
  };

  const Program &prog_;
  const ExploreConfig &cfg_;
  Collector col_;
  Verdict &v_;
  std::vector<Node> nodes_; // nodes_[i] is the state before steps_[i]
  std::vector<Done> steps_;
  bool stop_ = false;

  bool hb(std::size_t i, const VectorClock &c) const { return c.get(steps_[i].step.tid) >= steps_[i].own; }

  // Race detection for the step about to be appended: every earlier
  // conflicting step not already ordered before it through another step is a
  // race, and the reversal is scheduled.
  VectorClock analyse(const Step &next) {
    VectorClock c;
    unsigned own = 1;
    for (std::size_t i = steps_.size(); i-- > 0;)
      if (steps_[i].step.tid == next.tid) {
        c = steps_[i].clock;
        own = steps_[i].own + 1;
        break;
      }
    std::vector<std::size_t> races;
    for (std::size_t i = steps_.size(); i-- > 0;) {
      const Step &s = steps_[i].step;
      if (s.tid == next.tid || !conflict(s, next))
        continue;
      if (!hb(i, c) && reversible(s, next))
        races.push_back(i);
      c.join(steps_[i].clock);
    }
    for (std::size_t i : races)
      schedule_reversal(i, next, c);
    c.set(next.tid, own);
    return c;
  }

  void schedule_reversal(std::size_t i, const Step &next, const VectorClock &next_clock) {
    // v = notdep(e, E) . next; its initials are the threads whose first step
    // in v has no predecessor in v.
    std::vector<std::size_t> v;
    for (std::size_t j = i + 1; j < steps_.size(); ++j)
      if (!hb(i, steps_[j].clock))
        v.push_back(j);
    std::set<Tid> seen, initials;
    for (std::size_t a = 0; a < v.size(); ++a) {
      Tid t = steps_[v[a]].step.tid;
      if (!seen.insert(t).second)
        continue;
      bool initial = true;
      for (std::size_t b = 0; b < a && initial; ++b)
        if (hb(v[b], steps_[v[a]].clock))
          initial = false;
      if (initial)
        initials.insert(t);
    }
    if (!seen.count(next.tid)) {
      bool initial = true;
      for (std::size_t b : v)
        if (hb(b, next_clock))
          initial = false;
      if (initial)
        initials.insert(next.tid);
    }
    auto &bt = nodes_[i].backtrack;
    if (initials.empty())
      return;
    for (Tid t : initials)
      if (bt.count(t))
        return;
    bt.insert(*initials.begin());
  }

  void explore(const Interpreter &state, std::map<Tid, Step> sleep) {
    if (stop_)
      return;
    if (state.done()) {
      stop_ = col_.finish(state.trace());
      return;
    }
    auto enabled = state.enabled();
    const std::size_t depth = steps_.size();
    nodes_.push_back({});
    for (Tid t : enabled)
      if (!sleep.count(t)) {
        nodes_[depth].backtrack.insert(t);
        break;
      }
    if (nodes_[depth].backtrack.empty())
      ++v_.stats.blocked_explorations;

    while (!stop_) {
      std::optional<Tid> p;
      for (Tid t : nodes_[depth].backtrack)
        if (!sleep.count(t) && state.is_enabled(t)) {
          p = t;
          break;
        }
      if (!p)
        break;
      Interpreter child = state;
      auto ev = child.transition(*p);
      Step step = observe(child, *p, std::move(ev));
      VectorClock clock = analyse(step);
      // A terminating step also races with the pending step of every other
      // enabled thread, which it prevents from ever running.
      if (step.terminal)
        for (Tid q : enabled)
          if (q != *p && !sleep.count(q))
            nodes_[depth].backtrack.insert(q);

      std::map<Tid, Step> child_sleep;
      for (const auto &[q, s] : sleep)
        if (!conflict(s, step))
          child_sleep.emplace(q, s);
      unsigned own = clock.get(*p);
      steps_.push_back({step, std::move(clock), own});
      explore(child, std::move(child_sleep));
      steps_.pop_back();
      sleep.emplace(*p, step);
    }
    nodes_.pop_back();
  }
};

void enumerate(const Interpreter &state, Collector &col, const ExploreConfig &cfg, bool &stop) {
  if (stop)
    return;
  if (state.events().size() > cfg.naive_event_cap)
    throw NaiveCapExceeded(cfg.naive_event_cap);
  if (state.done()) {
    stop = col.finish(state.trace());
    return;
  }
  for (Tid t : state.enabled()) {
    Interpreter child = state;
    child.transition(t);
    enumerate(child, col, cfg, stop);
    if (stop)
      return;
  }
}

Verdict unsupported_verdict(std::string diag) {
  Verdict v;
  v.result = ResultKind::Unsupported;
  v.diagnostic = std::move(diag);
  return v;
}

template <class F> Verdict timed(F &&f) {
  auto t0 = std::chrono::steady_clock::now();
  Verdict v = f();
  v.stats.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return v;
}

} // namespace

std::string_view to_string(ResultKind k) { return kResultNames[static_cast<std::size_t>(k)]; }

std::optional<std::string> unsupported_construct(const Program &program) {
  for (const auto &f : program.functions)
    for (const auto &b : f.blocks)
      for (const auto &i : b.instrs) {
        if (i.is_intrinsic())
          return i.loc.str() + ": unsupported intrinsic " + std::string(to_string(i.op)) +
                 " (non-constant length or above the chunk limit)";
        if (i.op == Opcode::ExternCall)
          return i.loc.str() + ": call of unresolved external @" + i.callee;
      }
  return std::nullopt;
}

Verdict explore(const Program &program, const ExploreConfig &config) {
  if (config.max_executions == 0)
    throw std::invalid_argument("max_executions must be at least 1");
  if (auto diag = unsupported_construct(program))
    return unsupported_verdict(*diag);
  return timed([&] {
    Verdict v;
    ExploreConfig cfg = config;
    cfg.algorithm = Algorithm::Dpor;
    Dpor(program, cfg, v).run();
    return v;
  });
}

Verdict explore_naive(const Program &program, const ExploreConfig &config) {
  if (config.max_executions == 0)
    throw std::invalid_argument("max_executions must be at least 1");
  if (auto diag = unsupported_construct(program))
    return unsupported_verdict(*diag);
  return timed([&] {
    Verdict v;
    ExploreConfig cfg = config;
    cfg.algorithm = Algorithm::Naive;
    Collector col(cfg, v);
    bool stop = false;
    enumerate(Interpreter(program, exec_config(cfg)), col, cfg, stop);
    col.conclude();
    return v;
  });
}

} // namespace minimc
