#pragma once

// MCIR: the textual concurrent IR consumed by minimc.
//
// Allocations are untyped byte arrays; every typed view of memory lives on
// the loads and stores. Registers are function-local and may be reassigned.

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace minimc {

enum class SemType : std::uint8_t { I8, I16, I32, I64, Ptr };

constexpr unsigned width_of(SemType t) {
  switch (t) {
  case SemType::I8: return 1;
  case SemType::I16: return 2;
  case SemType::I32: return 4;
  case SemType::I64: return 8;
  case SemType::Ptr: return 8;
  }
  return 8;
}

std::string_view to_string(SemType t);
std::optional<SemType> parse_sem_type(std::string_view s);

enum class Ordering : std::uint8_t { None, Relaxed, Acquire, Release, AcqRel, SeqCst };

std::string_view to_string(Ordering o);
std::optional<Ordering> parse_ordering(std::string_view s);

enum class RmwOp : std::uint8_t { Add, Sub, Xchg };
enum class BinOpKind : std::uint8_t { Add, Sub, Mul, And, Or, Xor, Shl, LShr, AShr, SDiv, UDiv, SRem, URem };
enum class Pred : std::uint8_t { Eq, Ne, Slt, Sle, Sgt, Sge, Ult, Ule, Ugt, Uge };

std::string_view to_string(RmwOp op);
std::string_view to_string(BinOpKind op);
std::string_view to_string(Pred p);
std::optional<RmwOp> parse_rmw_op(std::string_view s);
std::optional<BinOpKind> parse_binop(std::string_view s);
std::optional<Pred> parse_pred(std::string_view s);

struct SrcLoc {
  std::string file;
  unsigned line = 0;

  bool operator==(const SrcLoc &) const = default;
  auto operator<=>(const SrcLoc &) const = default;
  std::string str() const { return file + ":" + std::to_string(line); }
};

struct Operand {
  enum class Kind : std::uint8_t { Reg, Imm, Symbol, Undef };

  Kind kind = Kind::Imm;
  std::string name; // register or symbol name, without sigil
  std::int64_t imm = 0;

  static Operand reg(std::string n) { return {Kind::Reg, std::move(n), 0}; }
  static Operand constant(std::int64_t v) { return {Kind::Imm, {}, v}; }
  static Operand symbol(std::string n) { return {Kind::Symbol, std::move(n), 0}; }
  static Operand undef() { return {Kind::Undef, {}, 0}; }

  bool is_reg() const { return kind == Kind::Reg; }
  bool is_imm() const { return kind == Kind::Imm; }
  bool is_symbol() const { return kind == Kind::Symbol; }
  bool is_undef() const { return kind == Kind::Undef; }

  bool operator==(const Operand &) const = default;
};

enum class Opcode : std::uint8_t {
  Alloca,     // args: [bytes]
  Load,       // args: [addr]
  Store,      // args: [value, addr]
  Rmw,        // args: [addr, operand]
  Memcpy,     // args: [dst, src, len]
  Memmove,    // args: [dst, src, len]
  Memset,     // args: [dst, byte, len]
  Spawn,      // callee, args: [arg]
  Join,       // args: [handle]
  Call,       // callee, args
  ExternCall, // callee, args
  BinOp,      // args: [a, b]
  Icmp,       // args: [a, b]
  Gep,        // args: [base, offset]
  Br,         // args: [] or [cond]; targets: 1 or 2 labels
  Assert,     // args: [cond]
  Panic,      // message
  Ret,        // args: [] or [value]
  GlobalRef,  // callee names the global
  BoundExceeded,
};

std::string_view to_string(Opcode op);

struct Instruction {
  Opcode op = Opcode::Ret;
  std::string result; // empty when the instruction produces nothing
  SemType type = SemType::I64;
  std::vector<Operand> args;
  std::string callee;
  Ordering ordering = Ordering::None;
  RmwOp rmw = RmwOp::Add;
  BinOpKind bin = BinOpKind::Add;
  Pred pred = Pred::Eq;
  std::vector<std::string> targets;
  std::string message;
  SrcLoc loc;

  bool operator==(const Instruction &) const = default;

  bool is_terminator() const {
    return op == Opcode::Br || op == Opcode::Ret || op == Opcode::Panic ||
           op == Opcode::BoundExceeded;
  }
  bool is_atomic() const { return ordering != Ordering::None; }
  bool is_intrinsic() const {
    return op == Opcode::Memcpy || op == Opcode::Memmove || op == Opcode::Memset;
  }
  // A store of `undef` is an initialization store: it writes zero and never
  // takes part in races or the dependency relation.
  bool is_init_store() const {
    return op == Opcode::Store && !args.empty() && args[0].is_undef();
  }
};

struct BasicBlock {
  std::string label;
  std::vector<Instruction> instrs;

  bool operator==(const BasicBlock &) const = default;
};

struct Param {
  std::string name;
  SemType type = SemType::I64;

  bool operator==(const Param &) const = default;
};

struct Function {
  std::string name;
  std::vector<Param> params;
  std::vector<BasicBlock> blocks; // blocks.front() is the entry block
  SrcLoc loc;

  bool operator==(const Function &) const = default;

  const BasicBlock *find_block(std::string_view label) const;
  BasicBlock *find_block(std::string_view label);
};

struct Global {
  std::string name;
  SemType type = SemType::I64;
  std::int64_t init = 0;
  SrcLoc loc;

  bool operator==(const Global &) const = default;
};

struct ExternDecl {
  std::string name;
  unsigned arity = 0;
  SrcLoc loc;

  bool operator==(const ExternDecl &) const = default;
};

struct Module {
  std::vector<Global> globals;
  std::vector<Function> functions;
  std::vector<ExternDecl> externs;

  bool operator==(const Module &) const = default;
  bool empty() const { return globals.empty() && functions.empty() && externs.empty(); }
};

// The linked whole program. Globals, functions and externs are kept sorted by
// name so that linking is insensitive to module order.
struct Program {
  std::vector<Global> globals;
  std::vector<Function> functions;
  std::vector<ExternDecl> externs;
  std::map<std::string, std::string> link_map; // symbol -> supplying module

  const Function *find_function(std::string_view name) const;
  Function *find_function(std::string_view name);
  const Global *find_global(std::string_view name) const;
  const ExternDecl *find_extern(std::string_view name) const;

  // Structural equality of code and data, ignoring the link map.
  bool same_code(const Program &other) const {
    return globals == other.globals && functions == other.functions &&
           externs == other.externs;
  }
  bool operator==(const Program &) const = default;
};

struct Diagnostic {
  SrcLoc loc;
  std::string message;

  bool operator==(const Diagnostic &) const = default;
  std::string str() const { return loc.str() + ": " + message; }
};

class ParseError : public std::runtime_error {
public:
  ParseError(std::string file, unsigned line, unsigned column, std::string message,
             std::vector<std::string> expected = {});

  const std::string &file() const { return file_; }
  unsigned line() const { return line_; }
  unsigned column() const { return column_; }
  const std::vector<std::string> &expected() const { return expected_; }

private:
  std::string file_;
  unsigned line_;
  unsigned column_;
  std::vector<std::string> expected_;
};

class LinkError : public std::runtime_error {
public:
  enum class Kind { UnresolvedSymbol, DuplicateDefinition, NoMain, ArityMismatch, NoModules };

  LinkError(Kind kind, std::string symbol);

  Kind kind() const { return kind_; }
  const std::string &symbol() const { return symbol_; }

private:
  Kind kind_;
  std::string symbol_;
};

// Parses one MCIR module. `file` names the source for locations.
Module parse_module(std::string_view text, std::string_view file = "<input>");

std::string print_module(const Module &m);
// Prints a linked program as a single module that reparses to the same code.
std::string print_program(const Program &p);
std::string print_instruction(const Instruction &inst);

// Threading symbols the interception pass knows how to rewrite. The linker
// accepts calls to these without a definition.
const std::vector<std::string> &default_threading_symbols();

struct NamedModule {
  std::string name;
  Module module;
};

Program link(const std::vector<NamedModule> &modules,
             const std::vector<std::string> &threading_symbols = default_threading_symbols());

std::vector<Diagnostic> validate(const Program &program);
std::vector<Diagnostic> validate(const Module &module);

} // namespace minimc
