#include "support/helpers.hpp"
#include "support/random_programs.hpp"

#include <doctest.h>

using namespace minimc;
using namespace minimc::testing;

namespace {

std::vector<const Instruction *> instrs_of(const Program &p, const std::string &fn, Opcode op) {
  std::vector<const Instruction *> out;
  for (const auto &b : p.find_function(fn)->blocks)
    for (const auto &i : b.instrs)
      if (i.op == op)
        out.push_back(&i);
  return out;
}

const Allocation &main_alloc(const Trace &t, std::uint32_t index) {
  const Allocation *a = t.final_memory.find(AllocId{0, index});
  REQUIRE(a);
  return *a;
}

const char *kCopy24 = R"(define @main() {
  %src = alloca 24
  %dst = alloca 24
  %s1 = gep %src, 8
  %s2 = gep %src, 16
  store i64 11, %src
  store i64 22, %s1
  store i64 33, %s2
  memcpy %dst, %src, 24
  ret
}
)";

} // namespace

TEST_CASE("interception rewrites threading calls") {
  const char *src = R"(declare @pthread_create(2)
declare @pthread_join(1)
define @worker(%a: ptr) {
  ret 7
}
define @main() {
  %t = call @pthread_create(@worker, 0)
  %r = call @pthread_join(%t)
  ret
}
)";
  Program linked = program_from(src);
  PassReport rep;
  Program p = intercept_threads(linked, PassConfig::default_interception_table(), &rep);
  CHECK(rep.calls_intercepted == 2);
  auto spawns = instrs_of(p, "main", Opcode::Spawn);
  REQUIRE(spawns.size() == 1);
  CHECK(spawns[0]->callee == "worker");
  CHECK(spawns[0]->args.size() == 1);
  CHECK(instrs_of(p, "main", Opcode::Join).size() == 1);
  CHECK(instrs_of(p, "main", Opcode::ExternCall).empty());
  CHECK(p.externs.empty());

  SUBCASE("no threading calls is the identity") {
    Program plain = program_from(kCopy24);
    PassReport r2;
    CHECK(intercept_threads(plain, PassConfig::default_interception_table(), &r2).same_code(plain));
    CHECK(r2.calls_intercepted == 0);
  }
  SUBCASE("join without a handle is rejected") {
    Program bad = program_from("declare @pthread_join(0)\ndefine @main() {\n  call @pthread_join()\n  ret\n}\n");
    CHECK_THROWS_AS(intercept_threads(bad), InterceptError);
  }
}

TEST_CASE("memcpy of 24 bytes becomes three 64-bit load/store pairs") {
  PassReport rep;
  Program p = lower_intrinsics(program_from(kCopy24), 64, rep);
  CHECK(rep.intrinsics_lowered == 1);
  CHECK(instrs_of(p, "main", Opcode::Memcpy).empty());
  auto loads = instrs_of(p, "main", Opcode::Load);
  auto stores = instrs_of(p, "main", Opcode::Store);
  REQUIRE(loads.size() == 3);
  REQUIRE(stores.size() == 6); // 3 user stores + 3 lowered
  for (auto *l : loads)
    CHECK(l->type == SemType::I64);
  // The first chunk is read straight from the base, the others at 8 and 16.
  CHECK(loads[0]->args[0].name == "src");
  std::vector<std::int64_t> offs;
  for (auto *g : instrs_of(p, "main", Opcode::Gep))
    if (g->args[0].is_reg() && g->args[0].name == "src" && g->result.rfind("mc", 0) == 0)
      offs.push_back(g->args[1].imm);
  CHECK(offs == std::vector<std::int64_t>{8, 16});

  Trace t = run_schedule(p, {});
  CHECK(t.outcome == Outcome::Completed);
  CHECK(main_alloc(t, 1).bytes == main_alloc(t, 0).bytes);
}

TEST_CASE("memcpy edge lengths") {
  SUBCASE("zero length disappears") {
    PassReport rep;
    Program p = lower_intrinsics(
        program_from("define @main() {\n  %a = alloca 8\n  %b = alloca 8\n  memcpy %a, %b, 0\n  ret\n}\n"), 64, rep);
    CHECK(instrs_of(p, "main", Opcode::Memcpy).empty());
    CHECK(instrs_of(p, "main", Opcode::Load).empty());
  }
  SUBCASE("five bytes become byte pairs matching a byte-wise copy") {
    std::mt19937 rng(5);
    for (int round = 0; round < 20; ++round) {
      std::ostringstream os;
      std::vector<std::uint8_t> bytes(8);
      os << "define @main() {\n  %a = alloca 8\n  %b = alloca 8\n";
      for (unsigned i = 0; i < 8; ++i) {
        bytes[i] = static_cast<std::uint8_t>(rng());
        os << "  %a" << i << " = gep %a, " << i << "\n  store i8 " << int(bytes[i]) << ", %a" << i << "\n";
        os << "  %b" << i << " = gep %b, " << i << "\n  store i8 0, %b" << i << "\n";
      }
      os << "  %d = gep %b, 2\n  memcpy %d, %a, 5\n  ret\n}\n";
      PassReport rep;
      Program p = lower_intrinsics(program_from(os.str()), 64, rep);
      auto loads = instrs_of(p, "main", Opcode::Load);
      REQUIRE(loads.size() == 5);
      for (auto *l : loads)
        CHECK(l->type == SemType::I8);
      std::vector<std::uint8_t> expect(8, 0);
      std::copy(bytes.begin(), bytes.begin() + 5, expect.begin() + 2);
      CHECK(main_alloc(run_schedule(p, {}), 1).bytes == expect);
    }
  }
  SUBCASE("register length is left in place with a diagnostic") {
    PassReport rep;
    Program p = lower_intrinsics(
        program_from("define @main() {\n  %a = alloca 8\n  %b = alloca 8\n  %n = add i64 4, 4\n  memcpy %a, %b, %n\n  ret\n}\n"),
        64, rep);
    CHECK(instrs_of(p, "main", Opcode::Memcpy).size() == 1);
    REQUIRE(rep.diagnostics.size() == 1);
    CHECK(rep.diagnostics[0].message.find("unsupported intrinsic") != std::string::npos);
    CHECK(rep.diagnostics[0].loc.line == 5);
  }
  SUBCASE("length above the chunk limit is left in place") {
    PassReport rep;
    Program p = lower_intrinsics(
        program_from("define @main() {\n  %a = alloca 128\n  %b = alloca 128\n  memcpy %a, %b, 72\n  ret\n}\n"), 64,
        rep);
    CHECK(instrs_of(p, "main", Opcode::Memcpy).size() == 1);
    CHECK(rep.diagnostics.size() == 1);
  }
}

TEST_CASE("lowered intrinsics match the byte-array reference") {
  IntrinsicGen gen(2024);
  for (int n = 0; n < 100; ++n) {
    IntrinsicProgram ip = gen.next();
    CAPTURE(ip.text);
    Program p = transformed(ip.text);
    CHECK(unsupported_construct(p) == std::nullopt);
    Trace t = run_schedule(p, {});
    REQUIRE(t.outcome == Outcome::Completed);
    auto ref = reference_bytes(ip);
    for (std::uint32_t b = 0; b < ref.size(); ++b)
      CHECK(main_alloc(t, b).bytes == ref[b]);
  }
}

TEST_CASE("memset replicates a register fill byte") {
  Program p = transformed(R"(define @main() {
  %a = alloca 16
  %v = add i64 0, 513
  memset %a, %v, 16
  ret
}
)");
  Trace t = run_schedule(p, {});
  CHECK(main_alloc(t, 0).bytes == std::vector<std::uint8_t>(16, 1));
}

TEST_CASE("init_undef covers every allocated byte") {
  SUBCASE("16 bytes: two 64-bit undef stores") {
    PassReport rep;
    Program p = init_undef(program_from("define @main() {\n  %p = alloca 16\n  ret\n}\n"), rep);
    auto stores = instrs_of(p, "main", Opcode::Store);
    REQUIRE(stores.size() == 2);
    for (auto *s : stores) {
      CHECK(s->is_init_store());
      CHECK(s->type == SemType::I64);
    }
    CHECK(rep.undef_stores_inserted == 2);
  }
  SUBCASE("3 bytes: three byte stores that read back as zero") {
    PassReport rep;
    Program p = init_undef(program_from(R"(global @out : i64 = 99
define @main() {
  %p = alloca 3
  %q = gep %p, 2
  %x = load i8 %q
  %y = load i16 %p
  %s = add i64 %x, %y
  store i64 %s, @out
  ret
}
)"),
                           rep);
    auto stores = instrs_of(p, "main", Opcode::Store);
    CHECK(std::count_if(stores.begin(), stores.end(), [](auto *s) { return s->is_init_store(); }) == 3);
    for (auto *s : stores)
      if (s->is_init_store())
        CHECK(s->type == SemType::I8);
    Trace t = run_schedule(p, {});
    REQUIRE(t.outcome == Outcome::Completed);
    CHECK(t.final_memory.find_global("out")->bytes == std::vector<std::uint8_t>(8, 0));
  }
  SUBCASE("no allocas is the identity") {
    PassReport rep;
    Program plain = program_from("global @g : i64 = 0\ndefine @main() {\n  store i64 1, @g\n  ret\n}\n");
    CHECK(init_undef(plain, rep).same_code(plain));
  }
}

TEST_CASE("loop bounding") {
  const char *spin = R"(global @flag : i64 = 0
define @main() {
entry:
  br head
head:
  %f = load i64 @flag
  br head
}
)";
  SUBCASE("straight-line code is untouched") {
    PassReport rep;
    Program plain = program_from(kCopy24);
    CHECK(bound_loops(plain, 10, rep).same_code(plain));
    CHECK(rep.loops_bounded == 0);
  }
  SUBCASE("a spin loop stops after k header visits") {
    for (unsigned k : {1u, 3u, 10u}) {
      PassConfig cfg;
      cfg.loop_bound = k;
      Program p = transformed(spin, cfg);
      Trace t = run_schedule(p, {});
      CHECK(t.outcome == Outcome::BoundExceeded);
      auto header_reads = std::count_if(t.events.begin(), t.events.end(), [](const Event &e) {
        return e.kind == EventKind::Read && e.loc.alloc.owner == -1;
      });
      CHECK(header_reads == k);
      Verdict v = explore(p);
      CHECK(v.result == ResultKind::OK);
      CHECK(v.stats.bound_exceeded);
    }
  }
  SUBCASE("a loop below the bound keeps its behaviour") {
    const char *three = R"(global @sum : i64 = 0
define @main() {
entry:
  %i = add i64 0, 0
  br head
head:
  %s = load i64 @sum
  %s2 = add i64 %s, %i
  store i64 %s2, @sum
  %i = add i64 %i, 1
  %more = icmp slt %i, 3
  br %more, head, out
out:
  ret
}
)";
    PassConfig off;
    off.bound_loops = false;
    Trace bounded = run_schedule(transformed(three), {});
    Trace unbounded = run_schedule(transformed(three, off), {});
    CHECK(bounded.outcome == Outcome::Completed);
    CHECK(bounded.final_memory.find_global("sum")->bytes == unbounded.final_memory.find_global("sum")->bytes);
    CHECK(bounded.final_memory.find_global("sum")->bytes[0] == 3);
  }
}

TEST_CASE("dead allocation elimination") {
  SUBCASE("untouched alloca is removed with its init stores") {
    PassReport rep;
    Program p = transformed("define @main() {\n  %p = alloca 24\n  ret\n}\n");
    CHECK(instrs_of(p, "main", Opcode::Alloca).empty());
    CHECK(instrs_of(p, "main", Opcode::Store).empty());
  }
  SUBCASE("alloca passed to a spawned thread is kept") {
    Program p = transformed(R"(define @w(%p: ptr) {
  ret
}
define @main() {
  %p = alloca 8
  %t = spawn @w(%p)
  ret
}
)");
    CHECK(instrs_of(p, "main", Opcode::Alloca).size() == 1);
  }
  SUBCASE("undef_result verdict is the same with and without the pass") {
    CheckOptions on, off;
    off.passes.dead_allocs = false;
    auto a = check_corpus({"undef_result.mcir"}, on).verdict;
    auto b = check_corpus({"undef_result.mcir"}, off).verdict;
    CHECK(a.result == b.result);
    CHECK(machine_report(a) == machine_report(b));
    CHECK(check_corpus({"undef_result.mcir"}, on).pipeline.report.allocas_removed == 1);
  }
}

TEST_CASE("pipeline reports and fixed order") {
  SUBCASE("FFI counter intercepts two spawns") {
    auto r = check_corpus({"ffi_counter_rust.mcir", "ffi_counter_c.mcir"});
    CHECK(r.pipeline.report.calls_intercepted == 2);
    CHECK(r.pipeline.report.intrinsics_lowered == 0);
  }
  SUBCASE("empty main is unchanged") {
    Program p = program_from("define @main() {\n  ret\n}\n");
    CHECK(run_pipeline(p, {}).program.same_code(p));
  }
  SUBCASE("undef_result with init_undef disabled reports an uninitialized read") {
    CheckOptions off;
    off.passes.init_undef = false;
    CHECK(check_corpus({"undef_result.mcir"}, off).verdict.result == ResultKind::UninitializedRead);
    CHECK(check_corpus({"undef_result.mcir"}).verdict.result == ResultKind::OK);
  }
  SUBCASE("snapshots are taken per requested stage") {
    auto pr = run_pipeline(program_from(kCopy24), {}, {PipelineStage::Linked, PipelineStage::LowerIntrinsics});
    CHECK(pr.snapshots.size() == 2);
    CHECK(instrs_of(pr.snapshots.at(PipelineStage::Linked), "main", Opcode::Memcpy).size() == 1);
    CHECK(instrs_of(pr.snapshots.at(PipelineStage::LowerIntrinsics), "main", Opcode::Memcpy).empty());
  }
  SUBCASE("bad configuration is rejected") {
    PassConfig cfg;
    cfg.memcpy_chunk_limit = 12;
    CHECK_THROWS_AS(cfg.check(), std::invalid_argument);
    cfg.memcpy_chunk_limit = 64;
    cfg.loop_bound = 0;
    CHECK_THROWS_AS(cfg.check(), std::invalid_argument);
  }
}

TEST_CASE("every pass is idempotent on the corpus") {
  std::vector<std::vector<std::string>> programs = {
      {"ffi_counter_rust.mcir", "ffi_counter_c.mcir"}, {"rand_atomicity.mcir"}, {"unsafe_sync.mcir"},
      {"oob_index.mcir"}, {"raw_ptr.mcir"}, {"undef_result.mcir"}, {"passes/loop_spin.mcir"},
      {"passes/memcpy24.mcir"}, {"passes/intrinsics_mixed.mcir"}};
  for (const auto &names : programs) {
    CAPTURE(names.front());
    std::vector<SourceFile> files;
    for (const auto &n : names)
      files.push_back(corpus_file(n));
    Program p = load_program(files);
    PassReport r;
    Program a = intercept_threads(p, PassConfig::default_interception_table(), &r);
    CHECK(intercept_threads(a, PassConfig::default_interception_table(), &r).same_code(a));
    Program b = bound_loops(a, 10, r);
    CHECK(bound_loops(b, 10, r).same_code(b));
    Program c = lower_intrinsics(b, 64, r);
    CHECK(lower_intrinsics(c, 64, r).same_code(c));
    Program d = init_undef(c, r);
    CHECK(init_undef(d, r).same_code(d));
    Program e = eliminate_dead_allocs(d, r);
    CHECK(eliminate_dead_allocs(e, r).same_code(e));
    Program full = run_pipeline(p, {}).program;
    CHECK(run_pipeline(full, {}).program.same_code(full));
  }
}

TEST_CASE("init_undef is neutral on programs without uninitialized reads") {
  for (const char *name : {"rand_atomicity.mcir", "unsafe_sync.mcir", "oob_index.mcir", "raw_ptr.mcir"}) {
    CAPTURE(name);
    CheckOptions on, off;
    on.explore.stop_mode = off.explore.stop_mode = StopMode::KeepGoing;
    off.passes.init_undef = false;
    auto a = check_corpus({name}, on).verdict;
    auto b = check_corpus({name}, off).verdict;
    CHECK(a.result == b.result);
    CHECK(a.stats.executions_explored == b.stats.executions_explored);
  }
}
