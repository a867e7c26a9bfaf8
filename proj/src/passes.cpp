#include "minimc/passes.hpp"

#include <algorithm>
#include <array>
#include <functional>
#include <set>
#include <sstream>

namespace minimc {

std::map<std::string, ThreadIntrinsic> PassConfig::default_interception_table() {
  return {{"pthread_create", ThreadIntrinsic::Spawn},
          {"pthread_join", ThreadIntrinsic::Join},
          {"thread_spawn", ThreadIntrinsic::Spawn},
          {"thread_join", ThreadIntrinsic::Join}};
}

void PassConfig::check() const {
  if (loop_bound < 1)
    throw std::invalid_argument("loop bound must be at least 1");
  if (memcpy_chunk_limit < 8 || memcpy_chunk_limit % 8 != 0)
    throw std::invalid_argument("chunk limit must be a multiple of 8 and at least 8");
}

std::vector<std::string> PassConfig::threading_symbols() const {
  std::vector<std::string> out;
  for (const auto &[name, _] : interception_table)
    out.push_back(name);
  return out;
}

PassReport &PassReport::operator+=(const PassReport &o) {
  calls_intercepted += o.calls_intercepted;
  intrinsics_lowered += o.intrinsics_lowered;
  undef_stores_inserted += o.undef_stores_inserted;
  loops_bounded += o.loops_bounded;
  allocas_removed += o.allocas_removed;
  diagnostics.insert(diagnostics.end(), o.diagnostics.begin(), o.diagnostics.end());
  return *this;
}

std::string PassReport::summary() const {
  std::ostringstream os;
  os << "intercepted=" << calls_intercepted << " lowered=" << intrinsics_lowered
     << " undef_stores=" << undef_stores_inserted << " loops_bounded=" << loops_bounded
     << " allocas_removed=" << allocas_removed;
  return os.str();
}

namespace {

// Hands out register names that do not clash with any in the function.
class NameGen {
public:
  explicit NameGen(const Function &fn) {
    for (const auto &p : fn.params)
      used_.insert(p.name);
    for (const auto &bb : fn.blocks) {
      labels_.insert(bb.label);
      for (const auto &inst : bb.instrs)
        if (!inst.result.empty())
          used_.insert(inst.result);
    }
  }

  std::string reg(const std::string &prefix) { return fresh(used_, prefix); }
  std::string label(const std::string &prefix) { return fresh(labels_, prefix); }

private:
  std::string fresh(std::set<std::string> &pool, const std::string &prefix) {
    for (;;) {
      std::string candidate = prefix + std::to_string(counter_++);
      if (pool.insert(candidate).second)
        return candidate;
    }
  }

  std::set<std::string> used_;
  std::set<std::string> labels_;
  unsigned counter_ = 0;
};

Instruction make(Opcode op, const SrcLoc &loc) {
  Instruction inst;
  inst.op = op;
  inst.loc = loc;
  return inst;
}

Instruction make_load(std::string result, SemType t, Operand addr, const SrcLoc &loc) {
  Instruction i = make(Opcode::Load, loc);
  i.result = std::move(result);
  i.type = t;
  i.args = {std::move(addr)};
  return i;
}

Instruction make_store(SemType t, Operand value, Operand addr, const SrcLoc &loc) {
  Instruction i = make(Opcode::Store, loc);
  i.type = t;
  i.args = {std::move(value), std::move(addr)};
  return i;
}

Instruction make_gep(std::string result, Operand base, std::int64_t off, const SrcLoc &loc) {
  Instruction i = make(Opcode::Gep, loc);
  i.result = std::move(result);
  i.args = {std::move(base), Operand::constant(off)};
  return i;
}

Instruction make_binop(std::string result, BinOpKind k, Operand a, Operand b, const SrcLoc &loc) {
  Instruction i = make(Opcode::BinOp, loc);
  i.result = std::move(result);
  i.bin = k;
  i.type = SemType::I64;
  i.args = {std::move(a), std::move(b)};
  return i;
}

// Address `base + off`, emitting a gep when the offset is non-zero.
Operand offset_addr(const Operand &base, std::int64_t off, NameGen &names, const std::string &prefix,
                    const SrcLoc &loc, std::vector<Instruction> &out) {
  if (off == 0)
    return base;
  std::string r = names.reg(prefix);
  out.push_back(make_gep(r, base, off, loc));
  return Operand::reg(r);
}

template <typename F> void rewrite_instructions(Program &program, F &&fn) {
  for (auto &f : program.functions) {
    NameGen names(f);
    for (auto &bb : f.blocks) {
      std::vector<Instruction> out;
      out.reserve(bb.instrs.size());
      for (std::size_t i = 0; i < bb.instrs.size(); ++i)
        fn(f, bb, i, names, out);
      bb.instrs = std::move(out);
    }
  }
}

} // namespace

Program intercept_threads(Program program, const std::map<std::string, ThreadIntrinsic> &table,
                          PassReport *report) {
  unsigned count = 0;
  rewrite_instructions(program, [&](Function &, BasicBlock &bb, std::size_t i, NameGen &names,
                                    std::vector<Instruction> &out) {
    Instruction inst = bb.instrs[i];
    auto it = inst.op == Opcode::ExternCall ? table.find(inst.callee) : table.end();
    if (it == table.end()) {
      out.push_back(std::move(inst));
      return;
    }
    if (it->second == ThreadIntrinsic::Spawn) {
      if (inst.args.size() != 2)
        throw InterceptError(inst.loc, "@" + inst.callee + " expects (function, argument), got " +
                                           std::to_string(inst.args.size()) + " arguments");
      if (!inst.args[0].is_symbol() || !program.find_function(inst.args[0].name))
        throw InterceptError(inst.loc, "@" + inst.callee + " must name a defined function as its first argument");
      Instruction spawn = make(Opcode::Spawn, inst.loc);
      spawn.callee = inst.args[0].name;
      spawn.args = {inst.args[1]};
      spawn.result = inst.result.empty() ? names.reg("thr.") : inst.result;
      out.push_back(std::move(spawn));
    } else {
      if (inst.args.size() != 1)
        throw InterceptError(inst.loc, "@" + inst.callee + " expects a thread handle, got " +
                                           std::to_string(inst.args.size()) + " arguments");
      Instruction join = make(Opcode::Join, inst.loc);
      join.args = {inst.args[0]};
      join.result = inst.result;
      out.push_back(std::move(join));
    }
    ++count;
  });
  std::erase_if(program.externs, [&](const ExternDecl &e) { return table.count(e.name) != 0; });
  if (report)
    report->calls_intercepted += count;
  return program;
}

Program lower_intrinsics(Program program, unsigned chunk_limit, PassReport &report) {
  rewrite_instructions(program, [&](Function &, BasicBlock &bb, std::size_t i, NameGen &names,
                                    std::vector<Instruction> &out) {
    const Instruction &inst = bb.instrs[i];
    if (!inst.is_intrinsic()) {
      out.push_back(inst);
      return;
    }
    const Operand &len = inst.args[2];
    const std::string what(to_string(inst.op));
    if (!len.is_imm()) {
      report.diagnostics.push_back({inst.loc, "unsupported intrinsic: " + what + " with non-constant length"});
      out.push_back(inst);
      return;
    }
    if (len.imm < 0 || static_cast<std::uint64_t>(len.imm) > chunk_limit) {
      report.diagnostics.push_back({inst.loc, "unsupported intrinsic: " + what + " of " +
                                                  std::to_string(len.imm) + " bytes exceeds the " +
                                                  std::to_string(chunk_limit) + "-byte limit"});
      out.push_back(inst);
      return;
    }
    ++report.intrinsics_lowered;
    const std::int64_t n = len.imm;
    const bool wide = n % 8 == 0;
    const SemType t = wide ? SemType::I64 : SemType::I8;
    const std::int64_t step = wide ? 8 : 1;
    const Operand &dst = inst.args[0];

    if (inst.op == Opcode::Memset) {
      Operand fill = inst.args[1];
      if (wide) {
        if (fill.is_imm()) {
          fill = Operand::constant(static_cast<std::int64_t>(
              (static_cast<std::uint64_t>(fill.imm) & 0xff) * 0x0101010101010101ULL));
        } else {
          std::string masked = names.reg("ms.");
          std::string rep = names.reg("ms.");
          out.push_back(make_binop(masked, BinOpKind::And, fill, Operand::constant(0xff), inst.loc));
          out.push_back(make_binop(rep, BinOpKind::Mul, Operand::reg(masked),
                                   Operand::constant(0x0101010101010101LL), inst.loc));
          fill = Operand::reg(rep);
        }
      }
      for (std::int64_t off = 0; off < n; off += step) {
        Operand d = offset_addr(dst, off, names, "ms.", inst.loc, out);
        out.push_back(make_store(t, fill, d, inst.loc));
      }
      return;
    }

    const Operand &src = inst.args[1];
    if (inst.op == Opcode::Memcpy) {
      for (std::int64_t off = 0; off < n; off += step) {
        Operand s = offset_addr(src, off, names, "mc.", inst.loc, out);
        Operand d = offset_addr(dst, off, names, "mc.", inst.loc, out);
        std::string v = names.reg("mc.");
        out.push_back(make_load(v, t, s, inst.loc));
        out.push_back(make_store(t, Operand::reg(v), d, inst.loc));
      }
      return;
    }

    // memmove: every source chunk is read before any destination chunk is
    // written, so overlapping ranges behave as if copied through a buffer.
    std::vector<std::string> staged;
    for (std::int64_t off = 0; off < n; off += step) {
      Operand s = offset_addr(src, off, names, "mm.", inst.loc, out);
      staged.push_back(names.reg("mm."));
      out.push_back(make_load(staged.back(), t, s, inst.loc));
    }
    std::size_t k = 0;
    for (std::int64_t off = 0; off < n; off += step) {
      Operand d = offset_addr(dst, off, names, "mm.", inst.loc, out);
      out.push_back(make_store(t, Operand::reg(staged[k++]), d, inst.loc));
    }
  });
  return program;
}

Program init_undef(Program program, PassReport &report) {
  rewrite_instructions(program, [&](Function &, BasicBlock &bb, std::size_t i, NameGen &names,
                                    std::vector<Instruction> &out) {
    const Instruction &inst = bb.instrs[i];
    out.push_back(inst);
    if (inst.op != Opcode::Alloca)
      return;
    // Already initialized by an earlier run of this pass.
    if (i + 1 < bb.instrs.size()) {
      const Instruction &nx = bb.instrs[i + 1];
      if (nx.is_init_store() && nx.args[1] == Operand::reg(inst.result))
        return;
    }
    const std::int64_t n = inst.args[0].imm;
    const Operand base = Operand::reg(inst.result);
    std::int64_t off = 0;
    for (; off + 8 <= n; off += 8) {
      Operand d = offset_addr(base, off, names, "ud.", inst.loc, out);
      out.push_back(make_store(SemType::I64, Operand::undef(), d, inst.loc));
      ++report.undef_stores_inserted;
    }
    for (; off < n; ++off) {
      Operand d = offset_addr(base, off, names, "ud.", inst.loc, out);
      out.push_back(make_store(SemType::I8, Operand::undef(), d, inst.loc));
      ++report.undef_stores_inserted;
    }
  });
  return program;
}

namespace {

constexpr std::string_view kLatchPrefix = "bound.latch.";
constexpr std::string_view kExitPrefix = "bound.exit.";
constexpr std::string_view kInitLabel = "bound.init";

// Back-edges (source block, target block) of a depth-first spanning tree
// rooted at the entry block.
std::vector<std::pair<std::size_t, std::size_t>> back_edges(const Function &fn) {
  std::map<std::string, std::size_t> index;
  for (std::size_t b = 0; b < fn.blocks.size(); ++b)
    index[fn.blocks[b].label] = b;
  auto succs = [&](std::size_t b) {
    std::vector<std::size_t> s;
    if (!fn.blocks[b].instrs.empty())
      for (const auto &t : fn.blocks[b].instrs.back().targets)
        if (auto it = index.find(t); it != index.end())
          s.push_back(it->second);
    return s;
  };
  enum class Color { White, Grey, Black };
  std::vector<Color> color(fn.blocks.size(), Color::White);
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  struct Frame {
    std::size_t block;
    std::vector<std::size_t> succ;
    std::size_t next = 0;
  };
  std::vector<Frame> stack;
  stack.push_back({0, succs(0)});
  color[0] = Color::Grey;
  while (!stack.empty()) {
    Frame &fr = stack.back();
    if (fr.next == fr.succ.size()) {
      color[fr.block] = Color::Black;
      stack.pop_back();
      continue;
    }
    std::size_t s = fr.succ[fr.next++];
    if (color[s] == Color::Grey) {
      edges.emplace_back(fr.block, s);
    } else if (color[s] == Color::White) {
      color[s] = Color::Grey;
      stack.push_back({s, succs(s)});
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

} // namespace

Program bound_loops(Program program, unsigned bound, PassReport &report) {
  for (auto &fn : program.functions) {
    if (fn.blocks.empty())
      continue;
    std::map<std::size_t, std::vector<std::size_t>> loops; // header -> latches
    for (auto [src, dst] : back_edges(fn))
      if (!fn.blocks[src].label.starts_with(kLatchPrefix))
        loops[dst].push_back(src);
    if (loops.empty())
      continue;

    NameGen names(fn);
    std::vector<Instruction> counter_init;
    std::vector<BasicBlock> added;
    struct Retarget {
      std::size_t block;
      std::string header;
      std::string latch;
    };
    std::vector<Retarget> retargets;

    for (const auto &[header, sources] : loops) {
      const std::string header_label = fn.blocks[header].label;
      const SrcLoc loc = fn.blocks[sources.front()].instrs.back().loc;
      const std::string counter = names.reg("lb.cnt.");
      Instruction alloca = make(Opcode::Alloca, loc);
      alloca.result = counter;
      alloca.args = {Operand::constant(8)};
      counter_init.push_back(std::move(alloca));
      counter_init.push_back(make_store(SemType::I64, Operand::constant(0), Operand::reg(counter), loc));

      const std::string exit_label = names.label(std::string(kExitPrefix));
      for (std::size_t src : sources) {
        const SrcLoc bloc = fn.blocks[src].instrs.back().loc;
        BasicBlock latch;
        latch.label = names.label(std::string(kLatchPrefix));
        std::string v = names.reg("lb.");
        std::string nv = names.reg("lb.");
        std::string ok = names.reg("lb.");
        latch.instrs.push_back(make_load(v, SemType::I64, Operand::reg(counter), bloc));
        latch.instrs.push_back(make_binop(nv, BinOpKind::Add, Operand::reg(v), Operand::constant(1), bloc));
        latch.instrs.push_back(make_store(SemType::I64, Operand::reg(nv), Operand::reg(counter), bloc));
        Instruction cmp = make(Opcode::Icmp, bloc);
        cmp.result = ok;
        cmp.pred = Pred::Slt;
        cmp.args = {Operand::reg(nv), Operand::constant(bound)};
        latch.instrs.push_back(std::move(cmp));
        Instruction br = make(Opcode::Br, bloc);
        br.args = {Operand::reg(ok)};
        br.targets = {header_label, exit_label};
        latch.instrs.push_back(std::move(br));
        retargets.push_back({src, header_label, latch.label});
        added.push_back(std::move(latch));
      }
      BasicBlock exit;
      exit.label = exit_label;
      exit.instrs.push_back(make(Opcode::BoundExceeded, loc));
      added.push_back(std::move(exit));
      ++report.loops_bounded;
    }

    for (const auto &r : retargets)
      for (auto &t : fn.blocks[r.block].instrs.back().targets)
        if (t == r.header)
          t = r.latch;

    // Counters live for the whole call; the entry block cannot host them if
    // it is itself a loop header.
    const bool entry_is_header = loops.count(0) != 0;
    if (fn.blocks.front().label == kInitLabel) {
      auto &ins = fn.blocks.front().instrs;
      ins.insert(ins.end() - 1, counter_init.begin(), counter_init.end());
    } else if (entry_is_header) {
      BasicBlock init;
      init.label = names.label(std::string(kInitLabel) + ".");
      Instruction br = make(Opcode::Br, fn.blocks.front().instrs.front().loc);
      br.targets = {fn.blocks.front().label};
      init.instrs = std::move(counter_init);
      init.instrs.push_back(std::move(br));
      fn.blocks.insert(fn.blocks.begin(), std::move(init));
    } else {
      auto &ins = fn.blocks.front().instrs;
      ins.insert(ins.begin(), counter_init.begin(), counter_init.end());
    }
    for (auto &bb : added)
      fn.blocks.push_back(std::move(bb));
  }
  return program;
}

Program eliminate_dead_allocs(Program program, PassReport &report) {
  for (auto &fn : program.functions) {
    std::map<std::string, unsigned> defs;
    for (const auto &p : fn.params)
      ++defs[p.name];
    for (const auto &bb : fn.blocks)
      for (const auto &inst : bb.instrs)
        if (!inst.result.empty())
          ++defs[inst.result];

    std::set<std::string> removed_regs;
    for (const auto &bb : fn.blocks)
      for (const auto &alloca : bb.instrs) {
        if (alloca.op != Opcode::Alloca || defs[alloca.result] != 1)
          continue;
        // Registers derived from the allocation through constant-offset geps.
        std::set<std::string> derived{alloca.result};
        bool grew = true;
        while (grew) {
          grew = false;
          for (const auto &b2 : fn.blocks)
            for (const auto &inst : b2.instrs)
              if (inst.op == Opcode::Gep && inst.args[0].is_reg() && derived.count(inst.args[0].name) &&
                  !derived.count(inst.result)) {
                derived.insert(inst.result);
                grew = true;
              }
        }
        bool dead = true;
        for (const auto &b2 : fn.blocks) {
          for (const auto &inst : b2.instrs) {
            for (std::size_t k = 0; k < inst.args.size() && dead; ++k) {
              const Operand &op = inst.args[k];
              if (!op.is_reg() || !derived.count(op.name))
                continue;
              bool ok = (inst.is_init_store() && k == 1) ||
                        (inst.op == Opcode::Gep && k == 0 && defs[inst.result] == 1);
              dead = ok;
            }
            if (!dead)
              break;
          }
          if (!dead)
            break;
        }
        if (dead) {
          removed_regs.insert(derived.begin(), derived.end());
          ++report.allocas_removed;
        }
      }
    if (removed_regs.empty())
      continue;
    for (auto &bb : fn.blocks)
      std::erase_if(bb.instrs, [&](const Instruction &inst) {
        if ((inst.op == Opcode::Alloca || inst.op == Opcode::Gep) && removed_regs.count(inst.result))
          return true;
        return inst.is_init_store() && inst.args[1].is_reg() && removed_regs.count(inst.args[1].name);
      });
  }
  return program;
}

std::string_view to_string(PipelineStage s) {
  constexpr std::array<std::string_view, 6> names{"linked", "intercept", "bound_loops",
                                                  "lower_intrinsics", "init_undef", "dead_alloc"};
  return names[static_cast<std::size_t>(s)];
}

std::optional<PipelineStage> parse_stage(std::string_view s) {
  for (int i = 0; i <= static_cast<int>(PipelineStage::DeadAlloc); ++i)
    if (to_string(static_cast<PipelineStage>(i)) == s)
      return static_cast<PipelineStage>(i);
  return std::nullopt;
}

PipelineResult run_pipeline(Program program, const PassConfig &config,
                            const std::vector<PipelineStage> &snapshot_stages) {
  config.check();
  PipelineResult res;
  auto snap = [&](PipelineStage s, const Program &p) {
    if (std::find(snapshot_stages.begin(), snapshot_stages.end(), s) != snapshot_stages.end())
      res.snapshots[s] = p;
  };
  snap(PipelineStage::Linked, program);
  if (config.intercept)
    program = intercept_threads(std::move(program), config.interception_table, &res.report);
  snap(PipelineStage::Intercept, program);
  if (config.bound_loops)
    program = bound_loops(std::move(program), config.loop_bound, res.report);
  snap(PipelineStage::BoundLoops, program);
  if (config.lower_intrinsics)
    program = lower_intrinsics(std::move(program), config.memcpy_chunk_limit, res.report);
  snap(PipelineStage::LowerIntrinsics, program);
  if (config.init_undef)
    program = init_undef(std::move(program), res.report);
  snap(PipelineStage::InitUndef, program);
  if (config.dead_allocs)
    program = eliminate_dead_allocs(std::move(program), res.report);
  snap(PipelineStage::DeadAlloc, program);
  res.program = std::move(program);
  return res;
}

} // namespace minimc
