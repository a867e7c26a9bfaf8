#include "support/helpers.hpp"
#include "support/random_programs.hpp"

#include <doctest.h>

#include <map>
#include <set>

using namespace minimc;
using namespace minimc::testing;

namespace {

std::size_t index_where(const Trace &t, Tid tid, EventKind kind, std::size_t nth = 0) {
  for (std::size_t i = 0; i < t.events.size(); ++i)
    if (t.events[i].tid == tid && t.events[i].kind == kind && nth-- == 0)
      return i;
  FAIL("event not found");
  return 0;
}

// Happens-before by explicit edges and graph search, independent of clocks.
std::vector<std::vector<bool>> reachability(const Trace &t) {
  const std::size_t n = t.events.size();
  std::vector<std::vector<std::size_t>> succ(n);
  std::map<Tid, std::size_t> last;
  for (std::size_t i = 0; i < n; ++i) {
    const Event &e = t.events[i];
    if (last.count(e.tid))
      succ[last[e.tid]].push_back(i);
    last[e.tid] = i;
    for (std::size_t j = 0; j < n; ++j) {
      const Event &o = t.events[j];
      if (e.kind == EventKind::ThreadCreate && o.kind == EventKind::ThreadStart && o.tid == e.other)
        succ[i].push_back(j);
      if (e.kind == EventKind::ThreadEnd && o.kind == EventKind::ThreadJoin && o.other == e.tid)
        succ[i].push_back(j);
    }
    if (e.is_read() && e.atomic)
      for (unsigned b = 0; b < e.loc.width; ++b) {
        Location byte{e.loc.alloc, e.loc.offset + b, 1};
        for (std::size_t w = i; w-- > 0;) {
          const Event &c = t.events[w];
          if (c.is_write() && c.loc.overlaps(byte)) {
            if (c.atomic && !c.is_init_store)
              succ[w].push_back(i);
            break;
          }
        }
      }
  }
  std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
  for (std::size_t s = 0; s < n; ++s) {
    std::vector<std::size_t> stack{s};
    while (!stack.empty()) {
      std::size_t v = stack.back();
      stack.pop_back();
      for (std::size_t w : succ[v])
        if (!reach[s][w]) {
          reach[s][w] = true;
          stack.push_back(w);
        }
    }
  }
  return reach;
}

std::set<std::pair<std::string, std::string>> oracle_race_sites(const Trace &t) {
  auto reach = reachability(t);
  std::set<std::pair<std::string, std::string>> out;
  for (std::size_t j = 0; j < t.events.size(); ++j)
    for (std::size_t i = 0; i < j; ++i) {
      const Event &a = t.events[i], &b = t.events[j];
      if (!a.is_access() || !b.is_access() || a.tid == b.tid || a.is_init_store || b.is_init_store)
        continue;
      if ((a.is_write() || b.is_write()) && !(a.atomic && b.atomic) && a.loc.overlaps(b.loc) && !reach[i][j])
        out.emplace(a.src.str(), b.src.str());
    }
  return out;
}

Trace random_trace(const Program &p, std::mt19937 &rng) {
  std::vector<Tid> sched(40);
  for (auto &s : sched)
    s = static_cast<Tid>(rng() % 3);
  return run_schedule(p, sched);
}

} // namespace

TEST_CASE("vector clock join laws") {
  std::mt19937 rng(1);
  auto random_clock = [&] {
    VectorClock c;
    for (Tid t = 0; t < 4; ++t)
      c.set(t, rng() % 5);
    return c;
  };
  for (int i = 0; i < 200; ++i) {
    VectorClock a = random_clock(), b = random_clock(), c = random_clock();
    VectorClock ab = a, ba = b;
    ab.join(b);
    ba.join(a);
    CHECK(ab == ba);
    VectorClock ab_c = ab, a_bc = a, bc = b;
    ab_c.join(c);
    bc.join(c);
    a_bc.join(bc);
    CHECK(ab_c == a_bc);
    VectorClock aa = a;
    aa.join(a);
    CHECK(aa == a);
    CHECK(a.leq(ab));
    CHECK(b.leq(ab));
  }
}

TEST_CASE("execution graph relations") {
  SUBCASE("store then load in one thread") {
    Program p = transformed("global @g : i64 = 0\ndefine @main() {\n  store i64 4, @g\n  %x = load i64 @g\n  ret\n}\n");
    Trace t = run_schedule(p, {});
    ExecutionGraph g = build_graph(t);
    REQUIRE(g.rf.size() == 1);
    CHECK(g.rf[0].write == index_where(t, 0, EventKind::Write));
    CHECK(g.rf[0].read == index_where(t, 0, EventKind::Read));
    REQUIRE(g.co.size() == 1);
    CHECK(g.co[0].first == kInitEvent);
    CHECK(is_acyclic(g));
  }
  SUBCASE("interleaved FFI increments") {
    Program p = run_pipeline(load_program({corpus_file("ffi_counter_rust.mcir"), corpus_file("ffi_counter_c.mcir")}),
                             {})
                    .program;
    Trace t = run_schedule(p, {0, 0, 0, 1, 1, 2, 2, 1, 2});
    ExecutionGraph g = build_graph(t);
    std::size_t w1 = index_where(t, 1, EventKind::Write), w2 = index_where(t, 2, EventKind::Write);
    CHECK(std::count(g.co.begin(), g.co.end(), std::make_pair(w1, w2)) == 1);
    CHECK(std::count(g.co.begin(), g.co.end(), std::make_pair(kInitEvent, w1)) == 1);
    CHECK(g.tc.size() == 2);
    CHECK(is_acyclic(g));
    // A later schedule where t2 reads after t1's write.
    Trace t2 = run_schedule(p, {0, 0, 0, 1, 1, 1, 2, 2});
    ExecutionGraph g2 = build_graph(t2);
    std::size_t r2 = index_where(t2, 2, EventKind::Read);
    auto rf = std::find_if(g2.rf.begin(), g2.rf.end(), [&](const ReadsFrom &r) { return r.read == r2; });
    REQUIRE(rf != g2.rf.end());
    CHECK(rf->write == index_where(t2, 1, EventKind::Write));
  }
  SUBCASE("stale cache schedule: the AVAILABLE load reads the initial value") {
    Program p = transformed(corpus_file("rand_atomicity.mcir").text);
    Trace t = run_schedule(p, {0, 0, 0, 1, 1, 1, 2, 2, 2, 1, 1, 2, 0, 0, 0});
    ExecutionGraph g = build_graph(t);
    std::size_t av_load = index_where(t, 2, EventKind::Read, 1);
    CHECK(t.events[av_load].src.line == 11);
    auto rf = std::find_if(g.rf.begin(), g.rf.end(), [&](const ReadsFrom &r) { return r.read == av_load; });
    REQUIRE(rf != g.rf.end());
    CHECK(rf->write == kInitEvent);
    CHECK(g.tj.size() == 2);
  }
  SUBCASE("a mixed-width read takes bytes from two writers") {
    Program p = transformed(R"(global @g : i64 = 0
define @main() {
  store i64 1, @g
  %p = globalref @g
  %hi = gep %p, 4
  store i32 2, %hi
  %x = load i64 @g
  ret
}
)");
    Trace t = run_schedule(p, {});
    ExecutionGraph g = build_graph(t);
    REQUIRE(g.rf.size() == 2);
    CHECK(g.rf[0].first_byte == 0);
    CHECK(g.rf[0].last_byte == 3);
    CHECK(g.rf[1].first_byte == 4);
    CHECK(g.rf[1].last_byte == 7);
    CHECK(g.rf[0].write != g.rf[1].write);
  }
}

TEST_CASE("graph invariants on random executions") {
  ConcurrentGen gen(5);
  std::mt19937 rng(6);
  for (int n = 0; n < 150; ++n) {
    Program p = transformed(gen.next());
    Trace t = random_trace(p, rng);
    ExecutionGraph g = build_graph(t);
    CHECK(is_acyclic(g));
    // Every read byte is served by exactly one earlier write (or the initializer).
    for (std::size_t i = 0; i < t.events.size(); ++i) {
      if (!t.events[i].is_read())
        continue;
      std::vector<int> cover(t.events[i].loc.width, 0);
      for (const auto &r : g.rf)
        if (r.read == i) {
          CHECK((r.write == kInitEvent || r.write < i));
          for (auto b = r.first_byte; b <= r.last_byte; ++b)
            ++cover[static_cast<std::size_t>(b)];
        }
      CHECK(std::all_of(cover.begin(), cover.end(), [](int c) { return c == 1; }));
    }
    // co follows trace order.
    for (auto [a, b] : g.co)
      CHECK((a == kInitEvent || a < b));
  }
}

TEST_CASE("happens-before examples") {
  SUBCASE("spawn orders the parent's earlier write before the child's read") {
    Program p = transformed(R"(global @g : i64 = 0
define @w(%a: ptr) {
  %x = load i64 @g
  ret
}
define @main() {
  store i64 1, @g
  %t = spawn @w(0)
  ret
}
)");
    Trace t = run_schedule(p, {});
    auto clocks = happens_before(t);
    CHECK(ordered_before(clocks, t, index_where(t, 0, EventKind::Write), index_where(t, 1, EventKind::Read)));
    CHECK(detect_races(t).empty());
  }
  SUBCASE("join orders the child's write before the parent's read") {
    Program p = transformed(R"(global @g : i64 = 0
define @w(%a: ptr) {
  store i64 1, @g
  ret
}
define @main() {
  %t = spawn @w(0)
  %r = join %t
  %x = load i64 @g
  ret
}
)");
    Trace t = run_schedule(p, {});
    auto clocks = happens_before(t);
    CHECK(ordered_before(clocks, t, index_where(t, 1, EventKind::Write), index_where(t, 0, EventKind::Read)));
    CHECK(detect_races(t).empty());
  }
  SUBCASE("the two Cell increments are unordered") {
    Program p = transformed(corpus_file("unsafe_sync.mcir").text);
    Trace t = run_schedule(p, {});
    auto clocks = happens_before(t);
    std::size_t main_write = 0, child_write = 0;
    for (std::size_t i = 0; i < t.events.size(); ++i)
      if (t.events[i].kind == EventKind::Write && t.events[i].src.line == 18)
        main_write = i;
      else if (t.events[i].kind == EventKind::Write && t.events[i].src.line == 17)
        child_write = i;
    REQUIRE(main_write != child_write);
    CHECK_FALSE(ordered_before(clocks, t, main_write, child_write));
    CHECK_FALSE(ordered_before(clocks, t, child_write, main_write));
  }
}

TEST_CASE("race detection on corpus traces") {
  SUBCASE("FFI counter: read and write of counter") {
    Program p = run_pipeline(load_program({corpus_file("ffi_counter_rust.mcir"), corpus_file("ffi_counter_c.mcir")}),
                             {})
                    .program;
    Trace t = run_schedule(p, {0, 0, 0, 1, 1, 2, 2, 1, 2});
    auto races = detect_races(t);
    REQUIRE_FALSE(races.empty());
    const Event &a = t.events[races[0].first], &b = t.events[races[0].second];
    CHECK(a.tid != b.tid);
    CHECK(a.is_write() != b.is_write());
    CHECK(a.src.file == "counter.c");
    CHECK(t.final_memory.find(a.loc.alloc)->name == "counter");
  }
  SUBCASE("fully atomic rand program has none") {
    Program p = transformed(corpus_file("rand_atomicity.mcir").text);
    CHECK(detect_races(run_schedule(p, {0, 0, 0, 1, 1, 1, 2, 2, 2, 1, 1, 2, 0, 0, 0})).empty());
    CHECK(detect_races(run_schedule(p, {})).empty());
  }
  SUBCASE("raw pointer writes race") {
    Program p = transformed(corpus_file("raw_ptr.mcir").text);
    auto t = run_schedule(p, {});
    auto races = detect_races(t);
    REQUIRE(races.size() == 1);
    std::set<unsigned> lines{t.events[races[0].first].src.line, t.events[races[0].second].src.line};
    CHECK(lines == std::set<unsigned>{8, 10});
    CHECK(t.events[races[0].first].is_write());
    CHECK(t.events[races[0].second].is_write());
  }
}

TEST_CASE("race detection agrees with a graph-search oracle") {
  ConcurrentGen gen(21);
  std::mt19937 rng(22);
  int racy = 0;
  for (int n = 0; n < 300; ++n) {
    Program p = transformed(gen.next());
    Trace t = random_trace(p, rng);
    auto races = detect_races(t);
    std::set<std::pair<std::string, std::string>> got;
    for (std::size_t k = 0; k < races.size(); ++k) {
      const Race &r = races[k];
      CHECK(r.first < r.second);
      if (k)
        CHECK(races[k - 1].second <= r.second);
      got.emplace(t.events[r.first].src.str(), t.events[r.second].src.str());
    }
    CHECK(got.size() == races.size());
    CHECK(got == oracle_race_sites(t));
    racy += !races.empty();
  }
  CHECK(racy > 30);
}

TEST_CASE("canonical forms identify reorderings of independent events") {
  Program p = transformed(R"(global @a : i64 = 0
global @b : i64 = 0
define @w(%x: ptr) {
  store i64 1, @b
  ret
}
define @main() {
  %t = spawn @w(0)
  store i64 1, @a
  ret
}
)");
  // main's write to @a and the child's write to @b commute.
  Trace x = run_schedule(p, {0, 0, 0, 1, 1, 1, 0});
  Trace y = run_schedule(p, {0, 0, 1, 1, 1, 0, 0});
  CHECK(x.events != y.events);
  CHECK(canonical_form(x) == canonical_form(y));

  Program q = transformed(conflict_family(2));
  Trace u = run_schedule(q, {0, 0, 0, 0, 1, 1, 2, 2});
  Trace v = run_schedule(q, {0, 0, 0, 0, 2, 2, 1, 1});
  CHECK(canonical_form(u) != canonical_form(v));
}
