#include "minimc/ir.hpp"

#include <algorithm>
#include <array>
#include <sstream>

namespace minimc {

namespace {

template <typename E, std::size_t N>
std::optional<E> lookup(const std::array<std::string_view, N> &names, std::string_view s) {
  for (std::size_t i = 0; i < N; ++i)
    if (names[i] == s)
      return static_cast<E>(i);
  return std::nullopt;
}

constexpr std::array<std::string_view, 5> kTypeNames{"i8", "i16", "i32", "i64", "ptr"};
constexpr std::array<std::string_view, 6> kOrderingNames{"none",    "relaxed", "acquire",
                                                          "release", "acq_rel", "seq_cst"};
constexpr std::array<std::string_view, 3> kRmwNames{"add", "sub", "xchg"};
constexpr std::array<std::string_view, 13> kBinNames{"add", "sub",  "mul",  "and",  "or",
                                                      "xor", "shl",  "lshr", "ashr", "sdiv",
                                                      "udiv", "srem", "urem"};
constexpr std::array<std::string_view, 10> kPredNames{"eq",  "ne",  "slt", "sle", "sgt",
                                                       "sge", "ult", "ule", "ugt", "uge"};
constexpr std::array<std::string_view, 20> kOpcodeNames{
    "alloca", "load", "store",  "atomic_rmw", "memcpy", "memmove", "memset",
    "spawn",  "join", "call",   "call",       "binop",  "icmp",    "gep",
    "br",     "assert", "panic", "ret",       "globalref", "bound_exceeded"};

std::string quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\')
      out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out += c;
  }
  out += '"';
  return out;
}

std::string operand_str(const Operand &op) {
  switch (op.kind) {
  case Operand::Kind::Reg: return "%" + op.name;
  case Operand::Kind::Imm: return std::to_string(op.imm);
  case Operand::Kind::Symbol: return "@" + op.name;
  case Operand::Kind::Undef: return "undef";
  }
  return "?";
}

void print_function(std::ostringstream &os, const Function &fn) {
  os << "define @" << fn.name << "(";
  for (std::size_t i = 0; i < fn.params.size(); ++i) {
    if (i)
      os << ", ";
    os << "%" << fn.params[i].name << ": " << to_string(fn.params[i].type);
  }
  os << ") {\n";
  for (const auto &bb : fn.blocks) {
    os << bb.label << ":\n";
    for (const auto &inst : bb.instrs)
      os << "  " << print_instruction(inst) << "\n";
  }
  os << "}\n";
}

void print_parts(std::ostringstream &os, const std::vector<Global> &globals,
                 const std::vector<ExternDecl> &externs, const std::vector<Function> &functions) {
  for (const auto &g : globals)
    os << "global @" << g.name << " : " << to_string(g.type) << " = " << g.init << "\n";
  for (const auto &e : externs)
    os << "declare @" << e.name << "(" << e.arity << ")\n";
  for (std::size_t i = 0; i < functions.size(); ++i) {
    if (i || !globals.empty() || !externs.empty())
      os << "\n";
    print_function(os, functions[i]);
  }
}

} // namespace

std::string_view to_string(SemType t) { return kTypeNames[static_cast<std::size_t>(t)]; }
std::optional<SemType> parse_sem_type(std::string_view s) { return lookup<SemType>(kTypeNames, s); }
std::string_view to_string(Ordering o) { return kOrderingNames[static_cast<std::size_t>(o)]; }
std::optional<Ordering> parse_ordering(std::string_view s) {
  auto o = lookup<Ordering>(kOrderingNames, s);
  if (o == Ordering::None)
    return std::nullopt;
  return o;
}
std::string_view to_string(RmwOp op) { return kRmwNames[static_cast<std::size_t>(op)]; }
std::string_view to_string(BinOpKind op) { return kBinNames[static_cast<std::size_t>(op)]; }
std::string_view to_string(Pred p) { return kPredNames[static_cast<std::size_t>(p)]; }
std::optional<RmwOp> parse_rmw_op(std::string_view s) { return lookup<RmwOp>(kRmwNames, s); }
std::optional<BinOpKind> parse_binop(std::string_view s) { return lookup<BinOpKind>(kBinNames, s); }
std::optional<Pred> parse_pred(std::string_view s) { return lookup<Pred>(kPredNames, s); }
std::string_view to_string(Opcode op) { return kOpcodeNames[static_cast<std::size_t>(op)]; }

const BasicBlock *Function::find_block(std::string_view label) const {
  for (const auto &bb : blocks)
    if (bb.label == label)
      return &bb;
  return nullptr;
}

BasicBlock *Function::find_block(std::string_view label) {
  for (auto &bb : blocks)
    if (bb.label == label)
      return &bb;
  return nullptr;
}

const Function *Program::find_function(std::string_view name) const {
  auto it = std::lower_bound(functions.begin(), functions.end(), name,
                             [](const Function &f, std::string_view n) { return f.name < n; });
  return it != functions.end() && it->name == name ? &*it : nullptr;
}

Function *Program::find_function(std::string_view name) {
  return const_cast<Function *>(std::as_const(*this).find_function(name));
}

const Global *Program::find_global(std::string_view name) const {
  auto it = std::lower_bound(globals.begin(), globals.end(), name,
                             [](const Global &g, std::string_view n) { return g.name < n; });
  return it != globals.end() && it->name == name ? &*it : nullptr;
}

const ExternDecl *Program::find_extern(std::string_view name) const {
  for (const auto &e : externs)
    if (e.name == name)
      return &e;
  return nullptr;
}

ParseError::ParseError(std::string file, unsigned line, unsigned column, std::string message,
                       std::vector<std::string> expected)
    : std::runtime_error([&] {
        std::string what = file + ":" + std::to_string(line) + ":" + std::to_string(column) +
                           ": " + message;
        if (!expected.empty()) {
          what += " (expected ";
          for (std::size_t i = 0; i < expected.size(); ++i)
            what += (i ? ", " : "") + expected[i];
          what += ")";
        }
        return what;
      }()),
      file_(std::move(file)), line_(line), column_(column), expected_(std::move(expected)) {}

namespace {
std::string link_message(LinkError::Kind kind, const std::string &symbol) {
  switch (kind) {
  case LinkError::Kind::UnresolvedSymbol: return "unresolved symbol @" + symbol;
  case LinkError::Kind::DuplicateDefinition: return "duplicate definition of @" + symbol;
  case LinkError::Kind::NoMain: return "no @main function defined";
  case LinkError::Kind::ArityMismatch: return "declaration of @" + symbol + " does not match its definition";
  case LinkError::Kind::NoModules: return "nothing to link";
  }
  return "link error";
}
} // namespace

LinkError::LinkError(Kind kind, std::string symbol)
    : std::runtime_error(link_message(kind, symbol)), kind_(kind), symbol_(std::move(symbol)) {}

std::string print_instruction(const Instruction &inst) {
  std::ostringstream os;
  if (!inst.result.empty())
    os << "%" << inst.result << " = ";
  const auto &a = inst.args;
  auto arg = [&](std::size_t i) { return operand_str(a.at(i)); };
  auto arglist = [&](std::size_t from) {
    std::string s;
    for (std::size_t i = from; i < a.size(); ++i)
      s += (i > from ? ", " : "") + operand_str(a[i]);
    return s;
  };
  switch (inst.op) {
  case Opcode::Alloca: os << "alloca " << arg(0); break;
  case Opcode::Load:
    if (inst.is_atomic())
      os << "atomic_load " << to_string(inst.type) << " " << arg(0) << " " << to_string(inst.ordering);
    else
      os << "load " << to_string(inst.type) << " " << arg(0);
    break;
  case Opcode::Store:
    if (inst.is_atomic())
      os << "atomic_store " << to_string(inst.type) << " " << arg(0) << ", " << arg(1) << " "
         << to_string(inst.ordering);
    else
      os << "store " << to_string(inst.type) << " " << arg(0) << ", " << arg(1);
    break;
  case Opcode::Rmw:
    os << "atomic_rmw " << to_string(inst.rmw) << " " << to_string(inst.type) << " " << arg(0)
       << ", " << arg(1) << " " << to_string(inst.ordering);
    break;
  case Opcode::Memcpy:
  case Opcode::Memmove:
  case Opcode::Memset:
    os << to_string(inst.op) << " " << arg(0) << ", " << arg(1) << ", " << arg(2);
    break;
  case Opcode::Spawn: os << "spawn @" << inst.callee << "(" << arglist(0) << ")"; break;
  case Opcode::Join: os << "join " << arg(0); break;
  case Opcode::Call:
  case Opcode::ExternCall: os << "call @" << inst.callee << "(" << arglist(0) << ")"; break;
  case Opcode::BinOp:
    os << to_string(inst.bin) << " " << to_string(inst.type) << " " << arg(0) << ", " << arg(1);
    break;
  case Opcode::Icmp: os << "icmp " << to_string(inst.pred) << " " << arg(0) << ", " << arg(1); break;
  case Opcode::Gep: os << "gep " << arg(0) << ", " << arg(1); break;
  case Opcode::Br:
    if (a.empty())
      os << "br " << inst.targets.at(0);
    else
      os << "br " << arg(0) << ", " << inst.targets.at(0) << ", " << inst.targets.at(1);
    break;
  case Opcode::Assert: os << "assert " << arg(0); break;
  case Opcode::Panic: os << "panic " << quote(inst.message); break;
  case Opcode::Ret:
    os << "ret";
    if (!a.empty())
      os << " " << arg(0);
    break;
  case Opcode::GlobalRef: os << "globalref @" << inst.callee; break;
  case Opcode::BoundExceeded: os << "bound_exceeded"; break;
  }
  if (!inst.loc.file.empty())
    os << " !loc " << quote(inst.loc.file) << ":" << inst.loc.line;
  return os.str();
}

std::string print_module(const Module &m) {
  std::ostringstream os;
  print_parts(os, m.globals, m.externs, m.functions);
  return os.str();
}

std::string print_program(const Program &p) {
  std::ostringstream os;
  print_parts(os, p.globals, p.externs, p.functions);
  return os.str();
}

const std::vector<std::string> &default_threading_symbols() {
  static const std::vector<std::string> symbols{"pthread_create", "pthread_join", "thread_spawn",
                                                "thread_join"};
  return symbols;
}

} // namespace minimc
