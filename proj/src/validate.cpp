#include "minimc/ir.hpp"

#include <functional>
#include <map>
#include <set>

namespace minimc {

namespace {

struct SymbolEnv {
  std::function<bool(const std::string &)> is_global;
  std::function<const Function *(const std::string &)> function;
  std::function<const ExternDecl *(const std::string &)> extern_decl;
};

class FunctionValidator {
public:
  FunctionValidator(const Function &fn, const SymbolEnv &env, std::vector<Diagnostic> &out)
      : fn_(fn), env_(env), out_(out) {}

  void run() {
    for (std::size_t b = 0; b < fn_.blocks.size(); ++b)
      index_[fn_.blocks[b].label] = b;
    for (const auto &bb : fn_.blocks)
      check_block(bb);
    check_def_before_use();
  }

private:
  void diag(const SrcLoc &loc, std::string msg) {
    out_.push_back({loc, "@" + fn_.name + ": " + std::move(msg)});
  }

  void check_block(const BasicBlock &bb) {
    if (bb.instrs.empty()) {
      diag(fn_.loc, "block '" + bb.label + "' is empty");
      return;
    }
    for (std::size_t i = 0; i < bb.instrs.size(); ++i) {
      const Instruction &inst = bb.instrs[i];
      bool last = i + 1 == bb.instrs.size();
      if (inst.is_terminator() && !last)
        diag(inst.loc, "block '" + bb.label + "' has a terminator before its end");
      if (last && !inst.is_terminator())
        diag(inst.loc, "block '" + bb.label + "' does not end in a terminator");
      check_instruction(inst);
    }
  }

  void check_symbol_operand(const Instruction &inst, const Operand &op, bool allow_function) {
    if (!op.is_symbol())
      return;
    if (env_.is_global(op.name))
      return;
    if (allow_function && env_.function(op.name))
      return;
    diag(inst.loc, "unknown " + std::string(allow_function ? "symbol" : "global") + " @" + op.name);
  }

  void check_instruction(const Instruction &inst) {
    const auto &a = inst.args;
    auto arity = [&](std::size_t n) {
      if (a.size() != n) {
        diag(inst.loc, std::string(to_string(inst.op)) + " expects " + std::to_string(n) + " operands");
        return false;
      }
      return true;
    };
    for (std::size_t i = 0; i < a.size(); ++i)
      if (a[i].is_undef() && !(inst.op == Opcode::Store && i == 0))
        diag(inst.loc, "undef may only appear as a stored value");

    switch (inst.op) {
    case Opcode::Alloca:
      if (arity(1) && (!a[0].is_imm() || a[0].imm <= 0))
        diag(inst.loc, "alloca size must be a positive constant");
      break;
    case Opcode::Load:
      if (inst.ordering == Ordering::Release || inst.ordering == Ordering::AcqRel)
        diag(inst.loc, "load cannot have " + std::string(to_string(inst.ordering)) + " ordering");
      if (arity(1))
        check_symbol_operand(inst, a[0], false);
      break;
    case Opcode::Store:
      if (inst.ordering == Ordering::Acquire || inst.ordering == Ordering::AcqRel)
        diag(inst.loc, "store cannot have " + std::string(to_string(inst.ordering)) + " ordering");
      if (arity(2)) {
        check_symbol_operand(inst, a[0], false);
        check_symbol_operand(inst, a[1], false);
      }
      break;
    case Opcode::Rmw:
      if (!inst.is_atomic())
        diag(inst.loc, "atomic_rmw requires an ordering");
      if (arity(2)) {
        check_symbol_operand(inst, a[0], false);
        check_symbol_operand(inst, a[1], false);
      }
      break;
    case Opcode::Memcpy:
    case Opcode::Memmove:
    case Opcode::Memset:
      if (arity(3))
        for (const auto &op : a)
          check_symbol_operand(inst, op, false);
      break;
    case Opcode::Spawn: {
      const Function *f = env_.function(inst.callee);
      if (!f)
        diag(inst.loc, "spawn of unknown function @" + inst.callee);
      else if (f->params.size() != 1)
        diag(inst.loc, "spawned function @" + inst.callee + " must take exactly one parameter");
      if (arity(1))
        check_symbol_operand(inst, a[0], false);
      break;
    }
    case Opcode::Join:
      arity(1);
      break;
    case Opcode::Call: {
      const Function *f = env_.function(inst.callee);
      if (!f)
        diag(inst.loc, "call of unknown function @" + inst.callee);
      else if (f->params.size() != a.size())
        diag(inst.loc, "call of @" + inst.callee + " passes " + std::to_string(a.size()) +
                           " arguments, expected " + std::to_string(f->params.size()));
      for (const auto &op : a)
        check_symbol_operand(inst, op, false);
      break;
    }
    case Opcode::ExternCall: {
      if (const ExternDecl *e = env_.extern_decl(inst.callee); e && e->arity != a.size())
        diag(inst.loc, "call of @" + inst.callee + " passes " + std::to_string(a.size()) +
                           " arguments, declared with " + std::to_string(e->arity));
      for (const auto &op : a)
        check_symbol_operand(inst, op, true);
      break;
    }
    case Opcode::BinOp:
    case Opcode::Icmp:
    case Opcode::Gep:
      if (arity(2))
        for (const auto &op : a)
          check_symbol_operand(inst, op, false);
      break;
    case Opcode::Br:
      if ((a.empty() && inst.targets.size() != 1) || (a.size() == 1 && inst.targets.size() != 2) ||
          a.size() > 1)
        diag(inst.loc, "malformed branch");
      for (const auto &t : inst.targets)
        if (!index_.count(t))
          diag(inst.loc, "branch to undefined label '" + t + "'");
      break;
    case Opcode::Assert:
      arity(1);
      break;
    case Opcode::Panic:
    case Opcode::BoundExceeded:
      break;
    case Opcode::Ret:
      if (a.size() > 1)
        diag(inst.loc, "ret takes at most one operand");
      for (const auto &op : a)
        check_symbol_operand(inst, op, false);
      break;
    case Opcode::GlobalRef:
      if (!env_.is_global(inst.callee))
        diag(inst.loc, "globalref of unknown global @" + inst.callee);
      break;
    }
  }

  // Must-defined dataflow: a register is usable only if it is assigned on
  // every path from the entry.
  void check_def_before_use() {
    const std::size_t n = fn_.blocks.size();
    std::set<std::string> all;
    for (const auto &p : fn_.params)
      all.insert(p.name);
    for (const auto &bb : fn_.blocks)
      for (const auto &inst : bb.instrs)
        if (!inst.result.empty())
          all.insert(inst.result);

    std::vector<std::vector<std::size_t>> preds(n);
    for (std::size_t b = 0; b < n; ++b)
      if (!fn_.blocks[b].instrs.empty())
        for (const auto &t : fn_.blocks[b].instrs.back().targets)
          if (auto it = index_.find(t); it != index_.end())
            preds[it->second].push_back(b);

    std::set<std::string> params;
    for (const auto &p : fn_.params)
      params.insert(p.name);

    std::vector<std::set<std::string>> in(n, all), out(n, all);
    in[0] = params;
    auto transfer = [&](std::size_t b, std::set<std::string> s) {
      for (const auto &inst : fn_.blocks[b].instrs)
        if (!inst.result.empty())
          s.insert(inst.result);
      return s;
    };
    bool changed = true;
    while (changed) {
      changed = false;
      for (std::size_t b = 0; b < n; ++b) {
        std::set<std::string> s;
        if (b == 0) {
          s = params;
        } else if (preds[b].empty()) {
          s = all; // unreachable: vacuous
        } else {
          s = out[preds[b][0]];
          for (std::size_t k = 1; k < preds[b].size(); ++k) {
            std::set<std::string> meet;
            for (const auto &r : s)
              if (out[preds[b][k]].count(r))
                meet.insert(r);
            s = std::move(meet);
          }
        }
        auto o = transfer(b, s);
        if (s != in[b] || o != out[b]) {
          in[b] = std::move(s);
          out[b] = std::move(o);
          changed = true;
        }
      }
    }

    for (std::size_t b = 0; b < n; ++b) {
      std::set<std::string> live = in[b];
      for (const auto &inst : fn_.blocks[b].instrs) {
        for (const auto &op : inst.args)
          if (op.is_reg() && !live.count(op.name))
            diag(inst.loc, "use before def of %" + op.name);
        if (!inst.result.empty())
          live.insert(inst.result);
      }
    }
  }

  const Function &fn_;
  const SymbolEnv &env_;
  std::vector<Diagnostic> &out_;
  std::map<std::string, std::size_t> index_;
};

} // namespace

std::vector<Diagnostic> validate(const Program &program) {
  std::vector<Diagnostic> out;
  SymbolEnv env{
      [&](const std::string &n) { return program.find_global(n) != nullptr; },
      [&](const std::string &n) { return program.find_function(n); },
      [&](const std::string &n) { return program.find_extern(n); },
  };
  if (const Function *m = program.find_function("main"); m && !m->params.empty())
    out.push_back({m->loc, "@main must take no parameters"});
  for (const auto &f : program.functions)
    FunctionValidator(f, env, out).run();
  return out;
}

std::vector<Diagnostic> validate(const Module &module) {
  std::vector<Diagnostic> out;
  auto find_fn = [&](const std::string &n) -> const Function * {
    for (const auto &f : module.functions)
      if (f.name == n)
        return &f;
    return nullptr;
  };
  SymbolEnv env{
      [&](const std::string &n) {
        for (const auto &g : module.globals)
          if (g.name == n)
            return true;
        return false;
      },
      find_fn,
      [&](const std::string &n) -> const ExternDecl * {
        for (const auto &e : module.externs)
          if (e.name == n)
            return &e;
        return nullptr;
      },
  };
  for (const auto &f : module.functions)
    FunctionValidator(f, env, out).run();
  return out;
}

} // namespace minimc
