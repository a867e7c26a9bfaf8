#pragma once

// Seeded generators of small MCIR programs for property tests.

#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace minimc::testing {

// ---------------------------------------------------------------------------
// Concurrent programs: main spawns up to two workers that touch two shared
// 8-byte globals with mixed widths and atomicity, optionally asserting on a
// value they read. Main may access the globals itself and join some workers.

struct ConcurrentShape {
  unsigned max_workers = 2;
  unsigned max_ops = 2; // per thread
};

class ConcurrentGen {
public:
  explicit ConcurrentGen(std::uint32_t seed) : rng_(seed) {}

  std::string next(const ConcurrentShape &shape = {}) {
    std::ostringstream os;
    reg_ = 0;
    os << "global @g0 : i64 = 0\nglobal @g1 : i64 = 0\n\n";
    unsigned workers = 1 + pick(shape.max_workers);
    for (unsigned w = 0; w < workers; ++w) {
      os << "define @w" << w << "(%arg: ptr) {\n";
      unsigned ops = 1 + pick(shape.max_ops);
      for (unsigned i = 0; i < ops; ++i)
        emit_op(os, "w" + std::to_string(w), i);
      os << "  ret\n}\n\n";
    }
    os << "define @main() {\n";
    for (unsigned w = 0; w < workers; ++w)
      os << "  %t" << w << " = spawn @w" << w << "(0) !loc \"main.c\":" << 10 + w << "\n";
    if (pick(2) == 0)
      emit_op(os, "main", 0);
    for (unsigned w = 0; w < workers; ++w)
      if (pick(3) != 0)
        os << "  %j" << w << " = join %t" << w << " !loc \"main.c\":" << 20 + w << "\n";
    if (pick(3) == 0)
      emit_op(os, "main", 1);
    os << "  ret\n}\n";
    return os.str();
  }

private:
  unsigned pick(unsigned n) { return std::uniform_int_distribution<unsigned>(0, n - 1)(rng_); }

  std::string fresh() { return "r" + std::to_string(reg_++); }

  // Address of a random access: a whole global, or one 4-byte half of it.
  std::pair<std::string, std::string> address(std::ostringstream &os, const std::string &loc) {
    std::string g = pick(2) ? "@g1" : "@g0";
    switch (pick(3)) {
    case 0: {
      std::string base = fresh(), p = fresh();
      os << "  %" << base << " = globalref " << g << loc << "\n";
      os << "  %" << p << " = gep %" << base << ", " << 4 * pick(2) << loc << "\n";
      return {"%" + p, "i32"};
    }
    default: return {g, "i64"};
    }
  }

  void emit_op(std::ostringstream &os, const std::string &fn, unsigned i) {
    std::string loc = " !loc \"" + fn + ".c\":" + std::to_string(i + 1);
    auto [addr, ty] = address(os, loc);
    std::string ord = pick(2) ? " seq_cst" : " relaxed";
    switch (pick(6)) {
    case 0:
      os << "  %" << fresh() << " = load " << ty << " " << addr << loc << "\n";
      break;
    case 1:
      os << "  %" << fresh() << " = atomic_load " << ty << " " << addr << ord << loc << "\n";
      break;
    case 2:
      os << "  store " << ty << " " << 1 + pick(3) << ", " << addr << loc << "\n";
      break;
    case 3:
      os << "  atomic_store " << ty << " " << 1 + pick(3) << ", " << addr << ord << loc << "\n";
      break;
    case 4:
      os << "  %" << fresh() << " = atomic_rmw add " << ty << " " << addr << ", " << 1 + pick(2) << ord << loc
         << "\n";
      break;
    case 5: {
      std::string v = fresh(), c = fresh();
      os << "  %" << v << " = atomic_load " << ty << " " << addr << ord << loc << "\n";
      os << "  %" << c << " = icmp ne %" << v << ", " << 1 + pick(2) << loc << "\n";
      os << "  assert %" << c << loc << "\n";
      break;
    }
    }
  }

  std::mt19937 rng_;
  unsigned reg_ = 0;
};

// k threads, each performing one plain write to the same global.
inline std::string conflict_family(unsigned k) {
  std::ostringstream os;
  os << "global @x : i64 = 0\n\n";
  for (unsigned i = 0; i < k; ++i)
    os << "define @w" << i << "(%a: ptr) {\n  store i64 " << i + 1 << ", @x !loc \"w.c\":" << i + 1
       << "\n  ret\n}\n\n";
  os << "define @main() {\n";
  for (unsigned i = 0; i < k; ++i)
    os << "  %t" << i << " = spawn @w" << i << "(0)\n";
  os << "  ret\n}\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Single-threaded intrinsic programs. Every buffer is fully initialized with
// known bytes, then a random sequence of constant-length memcpy, memmove and
// memset calls is applied. The generator records the operations so that a
// byte-array reference can replay them.

struct IntrinsicOp {
  enum Kind { Copy, Move, Set } kind = Copy;
  unsigned dst_buf = 0, dst_off = 0;
  unsigned src_buf = 0, src_off = 0; // Copy/Move
  unsigned len = 0;
  std::uint8_t byte = 0;             // Set
};

struct IntrinsicProgram {
  std::string text;
  std::vector<std::vector<std::uint8_t>> initial; // per buffer
  std::vector<IntrinsicOp> ops;
};

class IntrinsicGen {
public:
  explicit IntrinsicGen(std::uint32_t seed) : rng_(seed) {}

  IntrinsicProgram next() {
    IntrinsicProgram p;
    std::ostringstream os;
    unsigned nbufs = 2 + pick(2);
    os << "define @main() {\n";
    for (unsigned b = 0; b < nbufs; ++b) {
      unsigned words = 2 + pick(8); // 16..72 bytes
      std::vector<std::uint8_t> bytes(words * 8);
      os << "  %b" << b << " = alloca " << bytes.size() << "\n";
      for (unsigned w = 0; w < words; ++w) {
        std::uint64_t v = (static_cast<std::uint64_t>(rng_()) << 32) | rng_();
        for (unsigned i = 0; i < 8; ++i)
          bytes[w * 8 + i] = static_cast<std::uint8_t>(v >> (8 * i));
        os << "  %b" << b << "w" << w << " = gep %b" << b << ", " << w * 8 << "\n";
        os << "  store i64 " << static_cast<std::int64_t>(v) << ", %b" << b << "w" << w << "\n";
      }
      p.initial.push_back(std::move(bytes));
    }
    unsigned nops = 1 + pick(4);
    for (unsigned i = 0; i < nops; ++i) {
      IntrinsicOp op;
      op.kind = static_cast<IntrinsicOp::Kind>(pick(3));
      op.dst_buf = pick(nbufs);
      unsigned dst_size = static_cast<unsigned>(p.initial[op.dst_buf].size());
      if (op.kind == IntrinsicOp::Move) {
        op.src_buf = op.dst_buf; // overlapping within one buffer
      } else {
        op.src_buf = pick(nbufs);
        if (op.kind == IntrinsicOp::Copy && op.src_buf == op.dst_buf)
          op.src_buf = (op.dst_buf + 1) % nbufs;
      }
      unsigned src_size = static_cast<unsigned>(p.initial[op.src_buf].size());
      unsigned limit = std::min({64u, dst_size, op.kind == IntrinsicOp::Set ? dst_size : src_size});
      // Favour multiples of 8 so both lowering strategies are exercised.
      op.len = pick(2) ? 8 * (1 + pick(limit / 8)) : 1 + pick(limit);
      op.len = std::min(op.len, limit);
      op.dst_off = pick(dst_size - op.len + 1);
      op.src_off = pick(src_size - op.len + 1);
      op.byte = static_cast<std::uint8_t>(pick(256));
      std::string d = "%o" + std::to_string(i) + "d", s = "%o" + std::to_string(i) + "s";
      os << "  " << d << " = gep %b" << op.dst_buf << ", " << op.dst_off << "\n";
      if (op.kind == IntrinsicOp::Set) {
        os << "  memset " << d << ", " << unsigned(op.byte) << ", " << op.len << "\n";
      } else {
        os << "  " << s << " = gep %b" << op.src_buf << ", " << op.src_off << "\n";
        os << "  " << (op.kind == IntrinsicOp::Copy ? "memcpy " : "memmove ") << d << ", " << s << ", " << op.len
           << "\n";
      }
      p.ops.push_back(op);
    }
    os << "  ret\n}\n";
    p.text = os.str();
    return p;
  }

private:
  unsigned pick(unsigned n) { return n == 0 ? 0 : std::uniform_int_distribution<unsigned>(0, n - 1)(rng_); }

  std::mt19937 rng_;
};

// Byte-array reference semantics for the recorded operations.
inline std::vector<std::vector<std::uint8_t>> reference_bytes(const IntrinsicProgram &p) {
  auto mem = p.initial;
  for (const auto &op : p.ops) {
    auto &dst = mem[op.dst_buf];
    if (op.kind == IntrinsicOp::Set) {
      for (unsigned i = 0; i < op.len; ++i)
        dst[op.dst_off + i] = op.byte;
      continue;
    }
    std::vector<std::uint8_t> tmp(mem[op.src_buf].begin() + op.src_off,
                                  mem[op.src_buf].begin() + op.src_off + op.len);
    for (unsigned i = 0; i < op.len; ++i)
      dst[op.dst_off + i] = tmp[i];
  }
  return mem;
}

} // namespace minimc::testing
