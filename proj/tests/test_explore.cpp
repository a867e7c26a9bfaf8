#include "support/helpers.hpp"
#include "support/random_programs.hpp"

#include <doctest.h>

using namespace minimc;
using namespace minimc::testing;

namespace {

ExploreConfig all_classes(Algorithm a) {
  ExploreConfig c;
  c.algorithm = a;
  c.stop_mode = StopMode::KeepGoing;
  c.collect_classes = true;
  return c;
}

const char *kTwoWriters = R"(global @x : i64 = 0
define @w(%a: ptr) {
  store i64 1, @x !loc "w.c":3
  ret
}
define @main() {
  %t = spawn @w(0) !loc "m.c":6
  store i64 2, @x !loc "m.c":7
  %r = join %t !loc "m.c":8
  ret
}
)";

const char *kDistinct = R"(global @x : i64 = 0
global @y : i64 = 0
define @w(%a: ptr) {
  store i64 1, @x
  ret
}
define @main() {
  %t = spawn @w(0)
  store i64 2, @y
  %r = join %t
  ret
}
)";

std::uint64_t factorial(unsigned k) { return k <= 1 ? 1 : k * factorial(k - 1); }

} // namespace

TEST_CASE("two unsynchronised writers") {
  Verdict v = explore(transformed(kTwoWriters), all_classes(Algorithm::Dpor));
  CHECK(v.result == ResultKind::DataRace);
  CHECK(v.stats.executions_explored == 2);
  CHECK(v.classes.size() == 2);
  REQUIRE(v.event_a);
  REQUIRE(v.event_b);
  CHECK(v.event_a->is_write());
  CHECK(v.event_b->is_write());
  CHECK(v.event_a->tid != v.event_b->tid);
  REQUIRE(v.witness);
  CHECK(v.witness->outcome == Outcome::Completed);
}

TEST_CASE("writers of distinct globals need one execution") {
  Verdict v = explore(transformed(kDistinct));
  CHECK(v.result == ResultKind::OK);
  CHECK(v.stats.executions_explored == 1);
  CHECK_FALSE(v.witness);
}

TEST_CASE("k conflicting writers give k! classes") {
  for (unsigned k = 1; k <= 4; ++k) {
    CAPTURE(k);
    Program p = transformed(conflict_family(k));
    Verdict d = explore(p, all_classes(Algorithm::Dpor));
    CHECK(d.classes.size() == factorial(k));
    CHECK(d.stats.executions_explored - d.stats.blocked_explorations == factorial(k));
    if (k <= 3) {
      Verdict n = explore_naive(p, all_classes(Algorithm::Naive));
      CHECK(n.class_count == factorial(k));
      CHECK(n.classes == d.classes);
    }
  }
}

TEST_CASE("naive enumeration counts") {
  SUBCASE("single thread has one class") {
    Program p = transformed("global @g : i64 = 0\ndefine @main() {\n  store i64 1, @g\n  %x = load i64 @g\n  ret\n}\n");
    Verdict n = explore_naive(p);
    CHECK(n.class_count == 1);
    CHECK(n.stats.executions_explored == 1);
  }
  SUBCASE("two writers have two classes across more interleavings") {
    Verdict n = explore_naive(transformed(kTwoWriters), all_classes(Algorithm::Naive));
    CHECK(n.class_count == 2);
    CHECK(n.stats.executions_explored > 2);
  }
  SUBCASE("every DPOR execution of the Cell program is a distinct class") {
    Verdict d = explore(transformed(corpus_file("unsafe_sync.mcir").text), all_classes(Algorithm::Dpor));
    CHECK(d.result == ResultKind::DataRace);
    CHECK(d.classes.size() == d.stats.executions_explored - d.stats.blocked_explorations);
  }
}

TEST_CASE("DPOR covers exactly the classes of exhaustive enumeration") {
  ConcurrentGen gen(99);
  std::uint64_t total_classes = 0;
  for (int n = 0; n < 120; ++n) {
    std::string text = gen.next();
    CAPTURE(text);
    Program p = transformed(text);
    Verdict naive = explore_naive(p, all_classes(Algorithm::Naive));
    Verdict dpor = explore(p, all_classes(Algorithm::Dpor));
    CHECK(dpor.classes == naive.classes);
    CHECK(dpor.result == naive.result);
    CHECK(dpor.stats.executions_explored <= naive.stats.executions_explored);
    total_classes += naive.class_count;
  }
  CHECK(total_classes > 120);
}

TEST_CASE("first-error verdicts from both explorers agree on the kind of bug") {
  ConcurrentGen gen(7);
  for (int n = 0; n < 60; ++n) {
    Program p = transformed(gen.next());
    Verdict a = explore(p);
    ExploreConfig nc;
    nc.algorithm = Algorithm::Naive;
    Verdict b = explore_naive(p, nc);
    CHECK((a.result == ResultKind::OK) == (b.result == ResultKind::OK));
    if (a.result != ResultKind::OK) {
      CHECK(a.witness);
      CHECK(b.witness);
    }
  }
}

TEST_CASE("exploration is deterministic") {
  Program p = run_pipeline(load_program({corpus_file("ffi_counter_rust.mcir"), corpus_file("ffi_counter_c.mcir")}),
                           {})
                  .program;
  ExploreConfig c = all_classes(Algorithm::Dpor);
  Verdict a = explore(p, c), b = explore(p, c);
  CHECK(a.result == b.result);
  CHECK(a.stats.executions_explored == b.stats.executions_explored);
  CHECK(a.classes == b.classes);
  REQUIRE(a.witness);
  CHECK(a.witness->schedule == b.witness->schedule);
  CHECK(a.event_a == b.event_a);
}

TEST_CASE("corpus verdicts") {
  auto kind = [](std::vector<std::string> files, PassConfig pc = {}) {
    CheckOptions o;
    o.passes = pc;
    return check_corpus(files, o).verdict;
  };
  CHECK(kind({"ffi_counter_rust.mcir", "ffi_counter_c.mcir"}).result == ResultKind::DataRace);
  CHECK(kind({"rand_atomicity.mcir"}).result == ResultKind::AssertViolation);
  CHECK(kind({"unsafe_sync.mcir"}).result == ResultKind::DataRace);
  CHECK(kind({"oob_index.mcir"}).result == ResultKind::OutOfBounds);
  CHECK(kind({"raw_ptr.mcir"}).result == ResultKind::DataRace);
  CHECK(kind({"undef_result.mcir"}).result == ResultKind::OK);
  PassConfig no_init;
  no_init.init_undef = false;
  CHECK(kind({"undef_result.mcir"}, no_init).result == ResultKind::UninitializedRead);
}

TEST_CASE("keep-going records every error site and reports the highest-ranked") {
  // Depending on the order of the atomic accesses main either indexes out of
  // bounds or fails an assertion; no execution races.
  Program p = transformed(R"(global @x : i64 = 0
define @w(%a: ptr) {
  atomic_store i64 1, @x seq_cst !loc "w.c":3
  ret
}
define @main() {
entry:
  %buf = alloca 8 !loc "m.c":5
  store i64 0, %buf !loc "m.c":5
  %t = spawn @w(0) !loc "m.c":6
  %v = atomic_load i64 @x seq_cst !loc "m.c":7
  %z = icmp eq %v, 0 !loc "m.c":8
  br %z, early, late !loc "m.c":8
early:
  %p = gep %buf, 8 !loc "m.c":9
  %bad = load i64 %p !loc "m.c":9
  ret
late:
  assert %z !loc "m.c":10
  ret
}
)");
  ExploreConfig c;
  c.stop_mode = StopMode::KeepGoing;
  Verdict v = explore(p, c);
  CHECK(v.result == ResultKind::AssertViolation);
  std::set<ResultKind> kinds;
  for (const auto &e : v.errors)
    kinds.insert(e.kind);
  CHECK(kinds == std::set<ResultKind>{ResultKind::OutOfBounds, ResultKind::AssertViolation});

  Verdict first = explore(p);
  CHECK(first.errors.size() == 1);
  CHECK(first.stats.executions_explored <= v.stats.executions_explored);
}

TEST_CASE("unsupported programs are rejected before exploring") {
  Module m = parse_module(R"(define @main() {
  %a = alloca 16
  %b = alloca 16
  %n = add i64 8, 8
  memcpy %a, %b, %n
  ret
}
)");
  Program p = link({{"m", m}});
  CHECK(unsupported_construct(p));
  Verdict v = explore(p);
  CHECK(v.result == ResultKind::Unsupported);
  CHECK(v.stats.executions_explored == 0);
  CHECK_FALSE(v.diagnostic.empty());

  Program ext = link({{"m", parse_module("declare @puts(1)\ndefine @main() {\n  call @puts(0)\n  ret\n}\n")}},
                     {"puts"});
  CHECK(explore(ext).result == ResultKind::Unsupported);
}

TEST_CASE("naive enumeration refuses large programs") {
  ExploreConfig c;
  c.algorithm = Algorithm::Naive;
  c.naive_event_cap = 8;
  CHECK_THROWS_AS(explore_naive(transformed(conflict_family(3)), c), NaiveCapExceeded);
}

TEST_CASE("execution budget") {
  Program p = transformed(conflict_family(4));
  ExploreConfig c;
  c.stop_mode = StopMode::KeepGoing;
  c.max_executions = 5;
  Verdict v = explore(p, c);
  CHECK(v.stats.executions_explored == 5);
  CHECK(v.stats.budget_exhausted);
  c.max_executions = 0;
  CHECK_THROWS_AS(explore(p, c), std::invalid_argument);
}

TEST_CASE("loop bound exhaustion is flagged") {
  Program p = transformed(R"(global @flag : i64 = 0
define @main() {
entry:
  br head
head:
  %v = atomic_load i64 @flag acquire
  %z = icmp eq %v, 0
  br %z, head, out
out:
  ret
}
)",
                          PassConfig{.loop_bound = 3});
  Verdict v = explore(p);
  CHECK(v.result == ResultKind::OK);
  CHECK(v.stats.bound_exceeded);
}
