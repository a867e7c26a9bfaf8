// Hand-written recursive descent parser for MCIR. The grammar is line
// oriented: every declaration, label and instruction occupies one line.

#include "minimc/ir.hpp"

#include <cctype>
#include <charconv>
#include <set>

namespace minimc {

namespace {

struct Token {
  enum class Kind { Ident, Reg, Sym, Int, Str, Punct, End };
  Kind kind = Kind::End;
  std::string text;
  std::int64_t value = 0;
  unsigned column = 1;
};

bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '$';
}

class LineLexer {
public:
  LineLexer(std::string_view line, const std::string &file, unsigned lineno)
      : line_(line), file_(file), lineno_(lineno) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < line_.size()) {
      char c = line_[i];
      if (c == ';')
        break;
      if (std::isspace(static_cast<unsigned char>(c))) {
        ++i;
        continue;
      }
      Token t;
      t.column = static_cast<unsigned>(i + 1);
      if (c == '%' || c == '@') {
        std::size_t j = i + 1;
        while (j < line_.size() && is_ident_char(line_[j]))
          ++j;
        if (j == i + 1)
          fail(t.column, std::string("empty name after '") + c + "'");
        t.kind = c == '%' ? Token::Kind::Reg : Token::Kind::Sym;
        t.text = std::string(line_.substr(i + 1, j - i - 1));
        i = j;
      } else if (c == '"') {
        std::size_t j = i + 1;
        std::string s;
        bool closed = false;
        while (j < line_.size()) {
          char d = line_[j];
          if (d == '\\' && j + 1 < line_.size()) {
            char e = line_[j + 1];
            s += e == 'n' ? '\n' : e;
            j += 2;
            continue;
          }
          if (d == '"') {
            closed = true;
            ++j;
            break;
          }
          s += d;
          ++j;
        }
        if (!closed)
          fail(t.column, "unterminated string literal");
        t.kind = Token::Kind::Str;
        t.text = std::move(s);
        i = j;
      } else if (std::isdigit(static_cast<unsigned char>(c)) ||
                 (c == '-' && i + 1 < line_.size() &&
                  std::isdigit(static_cast<unsigned char>(line_[i + 1])))) {
        std::size_t j = i + (c == '-' ? 1 : 0);
        bool hex = j + 1 < line_.size() && line_[j] == '0' && (line_[j + 1] == 'x' || line_[j + 1] == 'X');
        std::size_t digits = hex ? j + 2 : j;
        std::size_t k = digits;
        while (k < line_.size() && std::isxdigit(static_cast<unsigned char>(line_[k])) &&
               (hex || std::isdigit(static_cast<unsigned char>(line_[k]))))
          ++k;
        std::uint64_t mag = 0;
        auto [ptr, ec] = std::from_chars(line_.data() + digits, line_.data() + k, mag, hex ? 16 : 10);
        if (ec != std::errc() || k == digits)
          fail(t.column, "malformed integer literal");
        t.kind = Token::Kind::Int;
        t.value = c == '-' ? static_cast<std::int64_t>(0 - mag) : static_cast<std::int64_t>(mag);
        t.text = std::string(line_.substr(i, k - i));
        i = k;
      } else if (is_ident_char(c)) {
        std::size_t j = i;
        while (j < line_.size() && is_ident_char(line_[j]))
          ++j;
        t.kind = Token::Kind::Ident;
        t.text = std::string(line_.substr(i, j - i));
        i = j;
      } else if (c == '!' && line_.substr(i, 4) == "!loc") {
        t.kind = Token::Kind::Ident;
        t.text = "!loc";
        i += 4;
      } else if (std::string_view("(),:={}").find(c) != std::string_view::npos) {
        t.kind = Token::Kind::Punct;
        t.text = std::string(1, c);
        ++i;
      } else {
        fail(t.column, std::string("unexpected character '") + c + "'");
      }
      out.push_back(std::move(t));
    }
    Token end;
    end.column = static_cast<unsigned>(line_.size() + 1);
    out.push_back(end);
    return out;
  }

private:
  [[noreturn]] void fail(unsigned col, std::string msg) const {
    throw ParseError(file_, lineno_, col, std::move(msg));
  }

  std::string_view line_;
  const std::string &file_;
  unsigned lineno_;
};

class Parser {
public:
  Parser(std::string_view text, std::string_view file) : text_(text), file_(file) {}

  Module run() {
    std::size_t pos = 0;
    unsigned lineno = 0;
    while (pos <= text_.size()) {
      std::size_t nl = text_.find('\n', pos);
      std::string_view line = text_.substr(pos, nl == std::string_view::npos ? text_.size() - pos : nl - pos);
      if (!line.empty() && line.back() == '\r')
        line.remove_suffix(1);
      ++lineno;
      line_no_ = lineno;
      toks_ = LineLexer(line, file_, lineno).run();
      at_ = 0;
      if (peek().kind != Token::Kind::End)
        parse_line();
      if (nl == std::string_view::npos)
        break;
      pos = nl + 1;
    }
    if (fn_)
      throw ParseError(file_, fn_->loc.line, 1, "function @" + fn_->name + " is missing '}'");
    classify_calls();
    return std::move(module_);
  }

private:
  const Token &peek() const { return toks_[at_]; }
  const Token &next() { return toks_[at_ == toks_.size() - 1 ? at_ : at_++]; }

  [[noreturn]] void fail(const Token &t, std::string msg, std::vector<std::string> expected = {}) const {
    throw ParseError(file_, line_no_, t.column, std::move(msg), std::move(expected));
  }

  [[noreturn]] void unexpected(std::vector<std::string> expected) const {
    const Token &t = peek();
    std::string got = t.kind == Token::Kind::End ? "end of line" : "'" + t.text + "'";
    fail(t, "unexpected " + got, std::move(expected));
  }

  bool accept_punct(char c) {
    if (peek().kind == Token::Kind::Punct && peek().text[0] == c) {
      ++at_;
      return true;
    }
    return false;
  }

  void expect_punct(char c) {
    if (!accept_punct(c))
      unexpected({std::string("'") + c + "'"});
  }

  bool accept_ident(std::string_view s) {
    if (peek().kind == Token::Kind::Ident && peek().text == s) {
      ++at_;
      return true;
    }
    return false;
  }

  std::string expect_ident(const char *what) {
    if (peek().kind != Token::Kind::Ident)
      unexpected({what});
    return next().text;
  }

  std::string expect_sym() {
    if (peek().kind != Token::Kind::Sym)
      unexpected({"@symbol"});
    return next().text;
  }

  std::string expect_reg() {
    if (peek().kind != Token::Kind::Reg)
      unexpected({"%register"});
    return next().text;
  }

  std::int64_t expect_int() {
    if (peek().kind != Token::Kind::Int)
      unexpected({"integer"});
    return next().value;
  }

  SemType expect_type() {
    const Token &t = peek();
    if (t.kind == Token::Kind::Ident)
      if (auto ty = parse_sem_type(t.text)) {
        ++at_;
        return *ty;
      }
    unexpected({"type (i8, i16, i32, i64, ptr)"});
  }

  Ordering expect_ordering() {
    const Token &t = peek();
    if (t.kind == Token::Kind::Ident)
      if (auto o = parse_ordering(t.text)) {
        ++at_;
        return *o;
      }
    unexpected({"ordering (relaxed, acquire, release, acq_rel, seq_cst)"});
  }

  Operand expect_operand() {
    const Token &t = peek();
    switch (t.kind) {
    case Token::Kind::Reg: return Operand::reg(next().text);
    case Token::Kind::Sym: return Operand::symbol(next().text);
    case Token::Kind::Int: return Operand::constant(next().value);
    case Token::Kind::Ident:
      if (t.text == "undef") {
        ++at_;
        return Operand::undef();
      }
      break;
    default: break;
    }
    unexpected({"%register", "@symbol", "integer", "undef"});
  }

  void expect_end() {
    if (peek().kind != Token::Kind::End)
      unexpected({"end of line"});
  }

  void declare_symbol(const std::string &name, const Token &at) {
    if (!symbols_.insert(name).second)
      fail(at, "duplicate symbol @" + name);
  }

  void parse_line() {
    if (fn_) {
      parse_in_function();
      return;
    }
    const Token &head = peek();
    if (accept_ident("global")) {
      Global g;
      g.loc = {file_, line_no_};
      const Token &nameTok = peek();
      g.name = expect_sym();
      expect_punct(':');
      g.type = expect_type();
      expect_punct('=');
      g.init = expect_int();
      expect_end();
      declare_symbol(g.name, nameTok);
      module_.globals.push_back(std::move(g));
    } else if (accept_ident("declare")) {
      ExternDecl e;
      e.loc = {file_, line_no_};
      const Token &nameTok = peek();
      e.name = expect_sym();
      expect_punct('(');
      std::int64_t arity = expect_int();
      if (arity < 0)
        fail(nameTok, "negative arity");
      e.arity = static_cast<unsigned>(arity);
      expect_punct(')');
      expect_end();
      declare_symbol(e.name, nameTok);
      module_.externs.push_back(std::move(e));
    } else if (accept_ident("define")) {
      Function f;
      f.loc = {file_, line_no_};
      const Token &nameTok = peek();
      f.name = expect_sym();
      expect_punct('(');
      if (!accept_punct(')')) {
        do {
          Param p;
          p.name = expect_reg();
          expect_punct(':');
          p.type = expect_type();
          f.params.push_back(std::move(p));
        } while (accept_punct(','));
        expect_punct(')');
      }
      expect_punct('{');
      expect_end();
      declare_symbol(f.name, nameTok);
      module_.functions.push_back(std::move(f));
      fn_ = &module_.functions.back();
      (void)head;
    } else {
      unexpected({"global", "declare", "define"});
    }
  }

  void parse_in_function() {
    if (accept_punct('}')) {
      expect_end();
      finish_function();
      return;
    }
    // label?
    if (peek().kind == Token::Kind::Ident && toks_.size() == 3 && toks_[1].kind == Token::Kind::Punct &&
        toks_[1].text == ":") {
      std::string label = next().text;
      ++at_;
      for (const auto &bb : fn_->blocks)
        if (bb.label == label)
          fail(toks_[0], "duplicate label '" + label + "' in @" + fn_->name);
      fn_->blocks.push_back({label, {}});
      return;
    }
    if (fn_->blocks.empty())
      fn_->blocks.push_back({"entry", {}});
    Instruction inst = parse_instruction();
    fn_->blocks.back().instrs.push_back(std::move(inst));
  }

  void finish_function() {
    if (fn_->blocks.empty())
      throw ParseError(file_, line_no_, 1, "function @" + fn_->name + " has no body");
    for (const auto &bb : fn_->blocks)
      for (const auto &inst : bb.instrs)
        for (const auto &target : inst.targets)
          if (!fn_->find_block(target))
            throw ParseError(inst.loc.file, inst.loc.line, 1,
                             "branch to undefined label '" + target + "' in @" + fn_->name);
    fn_ = nullptr;
  }

  Instruction parse_instruction() {
    Instruction inst;
    inst.loc = {file_, line_no_};
    if (peek().kind == Token::Kind::Reg) {
      inst.result = next().text;
      expect_punct('=');
    }
    const Token &opTok = peek();
    std::string op = expect_ident("instruction");
    auto needs_result = [&](bool required) {
      if (required && inst.result.empty())
        fail(opTok, "'" + op + "' must assign a result register");
      if (!required && !inst.result.empty())
        fail(opTok, "'" + op + "' does not produce a value");
    };

    if (op == "alloca") {
      needs_result(true);
      inst.op = Opcode::Alloca;
      std::int64_t n = expect_int();
      if (n <= 0)
        fail(opTok, "alloca size must be positive");
      inst.args.push_back(Operand::constant(n));
    } else if (op == "load" || op == "atomic_load") {
      needs_result(true);
      inst.op = Opcode::Load;
      inst.type = expect_type();
      inst.args.push_back(expect_operand());
      if (op == "atomic_load")
        inst.ordering = expect_ordering();
    } else if (op == "store" || op == "atomic_store") {
      needs_result(false);
      inst.op = Opcode::Store;
      inst.type = expect_type();
      inst.args.push_back(expect_operand());
      expect_punct(',');
      inst.args.push_back(expect_operand());
      if (op == "atomic_store")
        inst.ordering = expect_ordering();
    } else if (op == "atomic_rmw") {
      inst.op = Opcode::Rmw;
      const Token &t = peek();
      auto rmw = t.kind == Token::Kind::Ident ? parse_rmw_op(t.text) : std::nullopt;
      if (!rmw)
        unexpected({"add", "sub", "xchg"});
      ++at_;
      inst.rmw = *rmw;
      inst.type = expect_type();
      inst.args.push_back(expect_operand());
      expect_punct(',');
      inst.args.push_back(expect_operand());
      inst.ordering = expect_ordering();
    } else if (op == "memcpy" || op == "memmove" || op == "memset") {
      needs_result(false);
      inst.op = op == "memcpy" ? Opcode::Memcpy : op == "memmove" ? Opcode::Memmove : Opcode::Memset;
      for (int i = 0; i < 3; ++i) {
        if (i)
          expect_punct(',');
        inst.args.push_back(expect_operand());
      }
    } else if (op == "spawn") {
      needs_result(true);
      inst.op = Opcode::Spawn;
      inst.callee = expect_sym();
      inst.args = parse_call_args();
    } else if (op == "join") {
      inst.op = Opcode::Join;
      inst.args.push_back(expect_operand());
    } else if (op == "call") {
      inst.op = Opcode::Call; // resolved to ExternCall once the module is complete
      inst.callee = expect_sym();
      inst.args = parse_call_args();
    } else if (auto bin = parse_binop(op)) {
      needs_result(true);
      inst.op = Opcode::BinOp;
      inst.bin = *bin;
      inst.type = expect_type();
      inst.args.push_back(expect_operand());
      expect_punct(',');
      inst.args.push_back(expect_operand());
    } else if (op == "icmp") {
      needs_result(true);
      inst.op = Opcode::Icmp;
      const Token &t = peek();
      auto pred = t.kind == Token::Kind::Ident ? parse_pred(t.text) : std::nullopt;
      if (!pred)
        unexpected({"eq", "ne", "slt", "sle", "sgt", "sge", "ult", "ule", "ugt", "uge"});
      ++at_;
      inst.pred = *pred;
      inst.args.push_back(expect_operand());
      expect_punct(',');
      inst.args.push_back(expect_operand());
    } else if (op == "gep") {
      needs_result(true);
      inst.op = Opcode::Gep;
      inst.args.push_back(expect_operand());
      expect_punct(',');
      inst.args.push_back(expect_operand());
    } else if (op == "br") {
      needs_result(false);
      inst.op = Opcode::Br;
      const Token &after = toks_[at_ + 1 < toks_.size() ? at_ + 1 : at_];
      bool unconditional = peek().kind == Token::Kind::Ident && peek().text != "undef" &&
                           (after.kind == Token::Kind::End ||
                            (after.kind == Token::Kind::Ident && after.text == "!loc"));
      if (unconditional) {
        inst.targets.push_back(next().text);
      } else {
        inst.args.push_back(expect_operand());
        expect_punct(',');
        inst.targets.push_back(expect_ident("label"));
        expect_punct(',');
        inst.targets.push_back(expect_ident("label"));
      }
    } else if (op == "assert") {
      needs_result(false);
      inst.op = Opcode::Assert;
      inst.args.push_back(expect_operand());
    } else if (op == "panic") {
      needs_result(false);
      inst.op = Opcode::Panic;
      if (peek().kind != Token::Kind::Str)
        unexpected({"string literal"});
      inst.message = next().text;
    } else if (op == "ret") {
      needs_result(false);
      inst.op = Opcode::Ret;
      if (peek().kind != Token::Kind::End && !(peek().kind == Token::Kind::Ident && peek().text == "!loc"))
        inst.args.push_back(expect_operand());
    } else if (op == "globalref") {
      needs_result(true);
      inst.op = Opcode::GlobalRef;
      inst.callee = expect_sym();
    } else if (op == "bound_exceeded") {
      needs_result(false);
      inst.op = Opcode::BoundExceeded;
    } else {
      fail(opTok, "unknown instruction '" + op + "'",
           {"alloca", "load", "store", "atomic_load", "atomic_store", "atomic_rmw", "memcpy",
            "memmove", "memset", "spawn", "join", "call", "icmp", "gep", "br", "assert", "panic",
            "ret", "globalref", "<binop>"});
    }

    if (accept_ident("!loc")) {
      if (peek().kind != Token::Kind::Str)
        unexpected({"string literal"});
      inst.loc.file = next().text;
      expect_punct(':');
      std::int64_t line = expect_int();
      if (line < 0)
        fail(opTok, "negative line in !loc");
      inst.loc.line = static_cast<unsigned>(line);
    }
    expect_end();
    return inst;
  }

  std::vector<Operand> parse_call_args() {
    std::vector<Operand> args;
    expect_punct('(');
    if (accept_punct(')'))
      return args;
    do
      args.push_back(expect_operand());
    while (accept_punct(','));
    expect_punct(')');
    return args;
  }

  // A call to a symbol this module does not define is an extern call, to be
  // resolved by the linker.
  void classify_calls() {
    std::set<std::string> defined;
    for (const auto &f : module_.functions)
      defined.insert(f.name);
    for (auto &f : module_.functions)
      for (auto &bb : f.blocks)
        for (auto &inst : bb.instrs)
          if (inst.op == Opcode::Call && !defined.count(inst.callee))
            inst.op = Opcode::ExternCall;
  }

  std::string_view text_;
  std::string file_;
  unsigned line_no_ = 0;
  std::vector<Token> toks_;
  std::size_t at_ = 0;
  Module module_;
  Function *fn_ = nullptr;
  std::set<std::string> symbols_;
};

} // namespace

Module parse_module(std::string_view text, std::string_view file) {
  return Parser(text, file).run();
}

} // namespace minimc
