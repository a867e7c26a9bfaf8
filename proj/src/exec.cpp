#include "minimc/exec.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <sstream>

namespace minimc {

namespace {

constexpr std::array<std::string_view, 10> kEventNames{
    "read", "write", "rmw", "create", "join", "assert_fail", "panic", "alloc", "start", "end"};
constexpr std::array<std::string_view, 6> kFaultNames{
    "out-of-bounds", "uninitialized-read", "assert-violation", "panic", "call-depth-exceeded",
    "unsupported"};

std::uint64_t width_mask(unsigned width) {
  return width >= 8 ? ~0ULL : ((1ULL << (8 * width)) - 1);
}

} // namespace

std::string_view to_string(EventKind k) { return kEventNames[static_cast<std::size_t>(k)]; }
std::string_view to_string(FaultKind k) { return kFaultNames[static_cast<std::size_t>(k)]; }

std::int64_t wrap_to_width(std::int64_t v, unsigned width) {
  if (width >= 8)
    return v;
  const unsigned bits = 8 * width;
  std::uint64_t u = static_cast<std::uint64_t>(v) & width_mask(width);
  if (u >> (bits - 1))
    u |= ~width_mask(width);
  return static_cast<std::int64_t>(u);
}

Value Value::integer(std::int64_t v, unsigned width) {
  return {Kind::Int, width, wrap_to_width(v, width), {}};
}

std::string Value::str() const {
  switch (kind) {
  case Kind::Int: return std::to_string(payload);
  case Kind::Ptr:
    return "&" + (alloc.owner < 0 ? "g" + std::to_string(alloc.index)
                                  : "a" + std::to_string(alloc.owner) + "." + std::to_string(alloc.index)) +
           "+" + std::to_string(payload);
  case Kind::Undef: return "undef";
  case Kind::ThreadHandle: return "thread" + std::to_string(payload);
  }
  return "?";
}

const Allocation *MemoryState::find(AllocId id) const {
  for (const auto &a : allocations)
    if (a.id == id)
      return &a;
  return nullptr;
}

Allocation *MemoryState::find(AllocId id) {
  return const_cast<Allocation *>(std::as_const(*this).find(id));
}

const Allocation *MemoryState::find_global(std::string_view name) const {
  for (const auto &a : allocations)
    if (a.id.owner < 0 && a.name == name)
      return &a;
  return nullptr;
}

// ---------------------------------------------------------------------------
// Compiled form: register names resolved to slots, labels to block indices
// and symbols to allocation or function indices.

struct COperand {
  enum class Kind : std::uint8_t { Reg, Imm, Global, Func, Undef };
  Kind kind = Kind::Imm;
  std::int64_t value = 0; // slot, immediate, global index or function index
};

struct CInstr {
  const Instruction *src = nullptr;
  std::vector<COperand> ops;
  std::int32_t result = -1;
  std::int64_t callee = -1;
  std::vector<std::size_t> targets;
};

struct CFunction {
  const Function *fn = nullptr;
  std::size_t slots = 0;
  std::vector<std::size_t> param_slots;
  std::vector<std::vector<CInstr>> blocks;
};

class CompiledProgram {
public:
  explicit CompiledProgram(Program p) : program(std::move(p)) {
    std::map<std::string, std::size_t> fn_index, global_index;
    for (std::size_t i = 0; i < program.functions.size(); ++i)
      fn_index[program.functions[i].name] = i;
    for (std::size_t i = 0; i < program.globals.size(); ++i)
      global_index[program.globals[i].name] = i;
    main = fn_index.count("main") ? static_cast<std::int64_t>(fn_index["main"]) : -1;

    for (const auto &fn : program.functions) {
      CFunction cf;
      cf.fn = &fn;
      std::map<std::string, std::size_t> slot;
      auto slot_of = [&](const std::string &name) {
        auto [it, inserted] = slot.emplace(name, slot.size());
        return it->second;
      };
      for (const auto &p : fn.params)
        cf.param_slots.push_back(slot_of(p.name));
      std::map<std::string, std::size_t> labels;
      for (std::size_t b = 0; b < fn.blocks.size(); ++b)
        labels[fn.blocks[b].label] = b;
      for (const auto &bb : fn.blocks) {
        std::vector<CInstr> block;
        for (const auto &inst : bb.instrs) {
          CInstr ci;
          ci.src = &inst;
          if (!inst.result.empty())
            ci.result = static_cast<std::int32_t>(slot_of(inst.result));
          for (const auto &op : inst.args) {
            COperand co;
            switch (op.kind) {
            case Operand::Kind::Reg:
              co = {COperand::Kind::Reg, static_cast<std::int64_t>(slot_of(op.name))};
              break;
            case Operand::Kind::Imm: co = {COperand::Kind::Imm, op.imm}; break;
            case Operand::Kind::Undef: co = {COperand::Kind::Undef, 0}; break;
            case Operand::Kind::Symbol:
              if (auto g = global_index.find(op.name); g != global_index.end())
                co = {COperand::Kind::Global, static_cast<std::int64_t>(g->second)};
              else if (auto f = fn_index.find(op.name); f != fn_index.end())
                co = {COperand::Kind::Func, static_cast<std::int64_t>(f->second)};
              else
                co = {COperand::Kind::Undef, 0};
              break;
            }
            ci.ops.push_back(co);
          }
          if (inst.op == Opcode::Call || inst.op == Opcode::Spawn) {
            if (auto f = fn_index.find(inst.callee); f != fn_index.end())
              ci.callee = static_cast<std::int64_t>(f->second);
          } else if (inst.op == Opcode::GlobalRef) {
            if (auto g = global_index.find(inst.callee); g != global_index.end())
              ci.callee = static_cast<std::int64_t>(g->second);
          }
          for (const auto &t : inst.targets)
            ci.targets.push_back(labels.count(t) ? labels[t] : 0);
          block.push_back(std::move(ci));
        }
        cf.blocks.push_back(std::move(block));
      }
      cf.slots = slot.size();
      functions.push_back(std::move(cf));
    }
  }

  Program program;
  std::vector<CFunction> functions;
  std::int64_t main = -1;
};

namespace {

Frame make_frame(const CFunction &cf, std::size_t index) {
  Frame fr;
  fr.function = index;
  fr.regs.resize(cf.slots);
  fr.defined.assign(cf.slots, false);
  return fr;
}

std::uint64_t encode(const Value &v) {
  switch (v.kind) {
  case Value::Kind::Int: return static_cast<std::uint64_t>(v.payload);
  case Value::Kind::Ptr:
    return (static_cast<std::uint64_t>(v.alloc.owner + 1) << 48) |
           (static_cast<std::uint64_t>(v.alloc.index & 0xffff) << 32) |
           (static_cast<std::uint64_t>(v.payload) & 0xffffffffULL);
  case Value::Kind::ThreadHandle: return static_cast<std::uint64_t>(v.payload);
  case Value::Kind::Undef: return 0;
  }
  return 0;
}

bool truthy(const Value &v) {
  switch (v.kind) {
  case Value::Kind::Int: return v.payload != 0;
  case Value::Kind::Undef: return false;
  default: return true;
  }
}

} // namespace

// ---------------------------------------------------------------------------

Interpreter::Interpreter(const Program &program, ExecConfig config)
    : Interpreter(std::make_shared<const CompiledProgram>(program), config) {}

Interpreter::Interpreter(std::shared_ptr<const CompiledProgram> program, ExecConfig config)
    : prog_(std::move(program)), config_(config) {
  const auto &globals = prog_->program.globals;
  for (std::size_t i = 0; i < globals.size(); ++i) {
    const Global &g = globals[i];
    Allocation a;
    a.id = {-1, static_cast<std::uint32_t>(i)};
    a.name = g.name;
    unsigned w = width_of(g.type);
    a.bytes.resize(w);
    a.init.assign(w, true);
    a.box.assign(w, 0);
    a.box_byte.assign(w, 0);
    auto enc = static_cast<std::uint64_t>(g.init);
    for (unsigned b = 0; b < w; ++b)
      a.bytes[b] = static_cast<std::uint8_t>(enc >> (8 * b));
    memory_.allocations.push_back(std::move(a));
  }
  if (prog_->main < 0) {
    outcome_ = Outcome::Faulted;
    fault_ = Fault{FaultKind::Unsupported, 0, {}, "program has no @main", std::nullopt};
    return;
  }
  ThreadState main;
  main.tid = 0;
  main.stack.push_back(make_frame(prog_->functions[static_cast<std::size_t>(prog_->main)],
                                  static_cast<std::size_t>(prog_->main)));
  threads_.push_back(std::move(main));
}

namespace {

struct Access {
  bool ok = false;
  Location loc;
  Allocation *alloc = nullptr;
  std::string error;
};

} // namespace

// Everything the instruction handlers need, kept out of the public header.
struct ExecImpl {
  Interpreter &in;
  const CompiledProgram &prog;
  MemoryState &mem;

  Value eval(const Frame &fr, const COperand &op) const {
    switch (op.kind) {
    case COperand::Kind::Reg: return fr.regs[static_cast<std::size_t>(op.value)];
    case COperand::Kind::Imm: return Value::integer(op.value, 8);
    case COperand::Kind::Global: return Value::pointer({-1, static_cast<std::uint32_t>(op.value)}, 0);
    case COperand::Kind::Func: return Value::integer(0, 8);
    case COperand::Kind::Undef: return Value::undef();
    }
    return Value::undef();
  }

  Access resolve(const Value &addr, unsigned width) {
    Access acc;
    if (!addr.is_ptr()) {
      acc.error = "dereference of non-pointer value " + addr.str();
      return acc;
    }
    acc.loc = {addr.alloc, addr.payload, width};
    Allocation *a = mem.find(addr.alloc);
    if (!a) {
      acc.error = "dereference of unknown allocation";
      return acc;
    }
    if (!a->live) {
      acc.error = "access to dead allocation " + addr.str();
      return acc;
    }
    const auto size = static_cast<std::int64_t>(a->bytes.size());
    if (addr.payload < 0 || addr.payload + static_cast<std::int64_t>(width) > size) {
      acc.error = "access of " + std::to_string(width) + " bytes at offset " +
                  std::to_string(addr.payload) + " of a " + std::to_string(size) + "-byte allocation";
      return acc;
    }
    acc.ok = true;
    acc.alloc = a;
    return acc;
  }

  static bool initialized(const Allocation &a, const Location &loc) {
    for (unsigned b = 0; b < loc.width; ++b)
      if (!a.init[static_cast<std::size_t>(loc.offset) + b])
        return false;
    return true;
  }

  Value load(const Allocation &a, const Location &loc, SemType type) const {
    const auto off = static_cast<std::size_t>(loc.offset);
    if (loc.width == 8 && a.box[off] != 0) {
      bool whole = true;
      for (unsigned b = 0; b < 8 && whole; ++b)
        whole = a.box[off + b] == a.box[off] && a.box_byte[off + b] == b;
      if (whole)
        return mem.boxes[a.box[off] - 1];
    }
    std::uint64_t raw = 0;
    for (unsigned b = 0; b < loc.width; ++b)
      raw |= static_cast<std::uint64_t>(a.bytes[off + b]) << (8 * b);
    (void)type;
    return Value::integer(static_cast<std::int64_t>(raw), loc.width);
  }

  void store(Allocation &a, const Location &loc, const Value &v) {
    const auto off = static_cast<std::size_t>(loc.offset);
    const std::uint64_t raw = encode(v);
    std::uint32_t box = 0;
    if (loc.width == 8 && (v.kind == Value::Kind::Ptr || v.kind == Value::Kind::ThreadHandle)) {
      auto it = std::find(mem.boxes.begin(), mem.boxes.end(), v);
      if (it == mem.boxes.end()) {
        mem.boxes.push_back(v);
        it = mem.boxes.end() - 1;
      }
      box = static_cast<std::uint32_t>(it - mem.boxes.begin()) + 1;
    }
    for (unsigned b = 0; b < loc.width; ++b) {
      a.bytes[off + b] = static_cast<std::uint8_t>(raw >> (8 * b));
      a.init[off + b] = true;
      a.box[off + b] = box;
      a.box_byte[off + b] = static_cast<std::uint8_t>(b);
    }
  }
};

Event Interpreter::make_event(ThreadState &th, EventKind kind, const SrcLoc &src) {
  Event e;
  e.tid = th.tid;
  e.seq = th.next_seq++;
  e.kind = kind;
  e.src = src;
  return e;
}

void Interpreter::raise(ThreadState &th, FaultKind kind, std::string message, std::optional<Location> loc) {
  th.status = ThreadStatus::Faulted;
  SrcLoc src;
  if (!th.stack.empty()) {
    const Frame &fr = th.stack.back();
    const auto &blocks = prog_->functions[fr.function].blocks;
    if (fr.block < blocks.size() && fr.instr < blocks[fr.block].size())
      src = blocks[fr.block][fr.instr].src->loc;
  }
  fault_ = Fault{kind, th.tid, src, std::move(message), loc};
  outcome_ = Outcome::Faulted;
}

void Interpreter::start_thread(ThreadState &th) { th.status = ThreadStatus::Runnable; }

void Interpreter::finish_thread(ThreadState &th, Value ret) {
  th.status = ThreadStatus::Finished;
  th.return_value = ret;
  th.stack.clear();
}

void Interpreter::update_outcome() {
  if (outcome_ != Outcome::Running)
    return;
  bool all_done = std::all_of(threads_.begin(), threads_.end(),
                              [](const ThreadState &t) { return t.status == ThreadStatus::Finished; });
  if (all_done) {
    outcome_ = Outcome::Completed;
    return;
  }
  if (enabled().empty()) {
    ThreadState *blocked = nullptr;
    for (auto &t : threads_)
      if (t.status != ThreadStatus::Finished) {
        blocked = &t;
        break;
      }
    raise(*blocked, FaultKind::Unsupported, "deadlock: every live thread is blocked on a join");
  }
}

bool Interpreter::is_enabled(Tid t) const {
  if (done() || t < 0 || static_cast<std::size_t>(t) >= threads_.size())
    return false;
  const ThreadState &th = threads_[static_cast<std::size_t>(t)];
  if (th.status == ThreadStatus::NotStarted)
    return true;
  if (th.status != ThreadStatus::Runnable || th.stack.empty())
    return false;
  const Frame &fr = th.stack.back();
  const CInstr &ci = prog_->functions[fr.function].blocks[fr.block][fr.instr];
  if (ci.src->op == Opcode::Join) {
    ExecImpl x{const_cast<Interpreter &>(*this), *prog_, const_cast<MemoryState &>(memory_)};
    Value h = x.eval(fr, ci.ops[0]);
    if (h.kind == Value::Kind::ThreadHandle && h.payload >= 0 &&
        static_cast<std::size_t>(h.payload) < threads_.size() && h.payload != t)
      return threads_[static_cast<std::size_t>(h.payload)].status == ThreadStatus::Finished;
  }
  return true;
}

std::vector<Tid> Interpreter::enabled() const {
  std::vector<Tid> out;
  for (std::size_t t = 0; t < threads_.size(); ++t)
    if (is_enabled(static_cast<Tid>(t)))
      out.push_back(static_cast<Tid>(t));
  return out;
}

std::optional<Event> Interpreter::step(Tid t) {
  if (!is_enabled(t))
    return std::nullopt;
  ThreadState &th = threads_[static_cast<std::size_t>(t)];
  if (th.status == ThreadStatus::NotStarted) {
    start_thread(th);
    const Frame &fr = th.stack.back();
    Event e = make_event(th, EventKind::ThreadStart, prog_->functions[fr.function].fn->loc);
    events_.push_back(e);
    return e;
  }

  ExecImpl x{*this, *prog_, memory_};
  Frame &fr = th.stack.back();
  const CFunction &cf = prog_->functions[fr.function];
  const CInstr &ci = cf.blocks[fr.block][fr.instr];
  const Instruction &inst = *ci.src;
  auto arg = [&](std::size_t i) { return x.eval(fr, ci.ops[i]); };
  auto set_result = [&](Value v) {
    if (ci.result >= 0) {
      fr.regs[static_cast<std::size_t>(ci.result)] = v;
      fr.defined[static_cast<std::size_t>(ci.result)] = true;
    }
  };
  auto advance = [&] { ++fr.instr; };
  std::optional<Event> emitted;
  auto emit = [&](Event e) {
    events_.push_back(e);
    emitted = std::move(e);
  };

  switch (inst.op) {
  case Opcode::Alloca: {
    const auto size = static_cast<std::size_t>(ci.ops[0].value);
    Allocation a;
    a.id = {th.tid, th.next_alloc++};
    a.bytes.assign(size, 0);
    a.init.assign(size, false);
    a.box.assign(size, 0);
    a.box_byte.assign(size, 0);
    AllocId id = a.id;
    memory_.allocations.push_back(std::move(a));
    fr.allocas.push_back(id);
    Event e = make_event(th, EventKind::Alloc, inst.loc);
    e.loc = {id, 0, static_cast<unsigned>(size)};
    set_result(Value::pointer(id, 0));
    advance();
    emit(std::move(e));
    break;
  }
  case Opcode::Load: {
    const unsigned w = width_of(inst.type);
    Access acc = x.resolve(arg(0), w);
    if (!acc.ok) {
      raise(th, FaultKind::OutOfBounds, acc.error, acc.loc);
      break;
    }
    if (!ExecImpl::initialized(*acc.alloc, acc.loc)) {
      raise(th, FaultKind::UninitializedRead, "read of uninitialized memory", acc.loc);
      break;
    }
    Value v = x.load(*acc.alloc, acc.loc, inst.type);
    Event e = make_event(th, EventKind::Read, inst.loc);
    e.loc = acc.loc;
    e.read_value = v;
    e.atomic = inst.is_atomic();
    e.ordering = inst.ordering;
    set_result(v);
    advance();
    emit(std::move(e));
    break;
  }
  case Opcode::Store: {
    const unsigned w = width_of(inst.type);
    Value v = arg(0);
    if (v.kind == Value::Kind::Int)
      v = Value::integer(v.payload, w);
    Access acc = x.resolve(arg(1), w);
    if (!acc.ok) {
      raise(th, FaultKind::OutOfBounds, acc.error, acc.loc);
      break;
    }
    x.store(*acc.alloc, acc.loc, v);
    Event e = make_event(th, EventKind::Write, inst.loc);
    e.loc = acc.loc;
    e.written_value = v.kind == Value::Kind::Undef ? Value::integer(0, w) : v;
    e.atomic = inst.is_atomic();
    e.ordering = inst.ordering;
    e.is_init_store = inst.is_init_store();
    advance();
    emit(std::move(e));
    break;
  }
  case Opcode::Rmw: {
    const unsigned w = width_of(inst.type);
    Access acc = x.resolve(arg(0), w);
    if (!acc.ok) {
      raise(th, FaultKind::OutOfBounds, acc.error, acc.loc);
      break;
    }
    if (!ExecImpl::initialized(*acc.alloc, acc.loc)) {
      raise(th, FaultKind::UninitializedRead, "read of uninitialized memory", acc.loc);
      break;
    }
    Value old = x.load(*acc.alloc, acc.loc, inst.type);
    Value operand = arg(1);
    Value next;
    if (inst.rmw == RmwOp::Xchg) {
      next = operand.is_int() ? Value::integer(operand.payload, w) : operand;
    } else {
      if (!old.is_int() || !operand.is_int()) {
        raise(th, FaultKind::Unsupported, "atomic arithmetic on a non-integer value", acc.loc);
        break;
      }
      std::uint64_t a = static_cast<std::uint64_t>(old.payload), b = static_cast<std::uint64_t>(operand.payload);
      next = Value::integer(static_cast<std::int64_t>(inst.rmw == RmwOp::Add ? a + b : a - b), w);
    }
    x.store(*acc.alloc, acc.loc, next);
    Event e = make_event(th, EventKind::Rmw, inst.loc);
    e.loc = acc.loc;
    e.read_value = old;
    e.written_value = next;
    e.atomic = true;
    e.ordering = inst.ordering;
    set_result(old);
    advance();
    emit(std::move(e));
    break;
  }
  case Opcode::Memcpy:
  case Opcode::Memmove:
  case Opcode::Memset:
    raise(th, FaultKind::Unsupported, "unsupported intrinsic " + std::string(to_string(inst.op)) + " reached execution");
    break;
  case Opcode::Spawn: {
    if (threads_.size() >= config_.max_threads) {
      raise(th, FaultKind::Unsupported, "thread limit of " + std::to_string(config_.max_threads) + " exceeded");
      break;
    }
    if (ci.callee < 0) {
      raise(th, FaultKind::Unsupported, "spawn of unknown function @" + inst.callee);
      break;
    }
    const auto fidx = static_cast<std::size_t>(ci.callee);
    const CFunction &target = prog_->functions[fidx];
    ThreadState child;
    child.tid = static_cast<Tid>(threads_.size());
    child.parent = th.tid;
    child.spawn_index = th.spawned++;
    Frame cfr = make_frame(target, fidx);
    if (!target.param_slots.empty() && !ci.ops.empty()) {
      cfr.regs[target.param_slots[0]] = arg(0);
      cfr.defined[target.param_slots[0]] = true;
    }
    child.stack.push_back(std::move(cfr));
    Event e = make_event(th, EventKind::ThreadCreate, inst.loc);
    e.other = child.tid;
    set_result(Value::thread(child.tid));
    advance();
    threads_.push_back(std::move(child)); // invalidates th and fr
    emit(std::move(e));
    break;
  }
  case Opcode::Join: {
    Value h = arg(0);
    if (h.kind != Value::Kind::ThreadHandle || h.payload < 0 ||
        static_cast<std::size_t>(h.payload) >= threads_.size() || h.payload == th.tid) {
      raise(th, FaultKind::Unsupported, "join of invalid thread handle " + h.str());
      break;
    }
    const ThreadState &target = threads_[static_cast<std::size_t>(h.payload)];
    Event e = make_event(th, EventKind::ThreadJoin, inst.loc);
    e.other = target.tid;
    e.read_value = target.return_value;
    set_result(target.return_value);
    advance();
    emit(std::move(e));
    break;
  }
  case Opcode::Call: {
    if (ci.callee < 0) {
      raise(th, FaultKind::Unsupported, "call of unknown function @" + inst.callee);
      break;
    }
    if (th.stack.size() >= config_.max_call_depth) {
      raise(th, FaultKind::CallDepthExceeded,
            "call depth limit of " + std::to_string(config_.max_call_depth) + " exceeded");
      break;
    }
    const auto fidx = static_cast<std::size_t>(ci.callee);
    const CFunction &target = prog_->functions[fidx];
    Frame callee = make_frame(target, fidx);
    for (std::size_t i = 0; i < target.param_slots.size() && i < ci.ops.size(); ++i) {
      callee.regs[target.param_slots[i]] = arg(i);
      callee.defined[target.param_slots[i]] = true;
    }
    callee.result_slot = ci.result;
    advance();
    th.stack.push_back(std::move(callee)); // invalidates fr
    break;
  }
  case Opcode::ExternCall:
    raise(th, FaultKind::Unsupported, "call of unresolved external @" + inst.callee);
    break;
  case Opcode::BinOp: {
    Value a = arg(0), b = arg(1);
    const unsigned w = width_of(inst.type);
    if (a.is_ptr() && b.is_ptr() && inst.bin == BinOpKind::Sub && a.alloc == b.alloc) {
      set_result(Value::integer(a.payload - b.payload, w));
      advance();
      break;
    }
    if (!(a.is_int() || a.kind == Value::Kind::Undef) || !(b.is_int() || b.kind == Value::Kind::Undef)) {
      raise(th, FaultKind::Unsupported, "arithmetic on non-integer values " + a.str() + ", " + b.str());
      break;
    }
    const auto ua = static_cast<std::uint64_t>(a.payload) & width_mask(w);
    const auto ub = static_cast<std::uint64_t>(b.payload) & width_mask(w);
    const std::int64_t sa = wrap_to_width(a.payload, w), sb = wrap_to_width(b.payload, w);
    const unsigned bits = 8 * w;
    std::uint64_t r = 0;
    switch (inst.bin) {
    case BinOpKind::Add: r = ua + ub; break;
    case BinOpKind::Sub: r = ua - ub; break;
    case BinOpKind::Mul: r = ua * ub; break;
    case BinOpKind::And: r = ua & ub; break;
    case BinOpKind::Or: r = ua | ub; break;
    case BinOpKind::Xor: r = ua ^ ub; break;
    case BinOpKind::Shl: r = ua << (ub % bits); break;
    case BinOpKind::LShr: r = ua >> (ub % bits); break;
    case BinOpKind::AShr: r = static_cast<std::uint64_t>(sa >> (ub % bits)); break;
    case BinOpKind::SDiv:
    case BinOpKind::SRem:
    case BinOpKind::UDiv:
    case BinOpKind::URem:
      if (ub == 0) {
        raise(th, FaultKind::Panic, "attempt to divide by zero");
        break;
      }
      if (inst.bin == BinOpKind::UDiv)
        r = ua / ub;
      else if (inst.bin == BinOpKind::URem)
        r = ua % ub;
      else if (sb == -1)
        r = inst.bin == BinOpKind::SDiv ? 0 - static_cast<std::uint64_t>(sa) : 0;
      else
        r = static_cast<std::uint64_t>(inst.bin == BinOpKind::SDiv ? sa / sb : sa % sb);
      break;
    }
    if (done())
      break;
    set_result(Value::integer(static_cast<std::int64_t>(r), w));
    advance();
    break;
  }
  case Opcode::Icmp: {
    Value a = arg(0), b = arg(1);
    bool res = false;
    auto cmp = [&](auto l, auto r) {
      switch (inst.pred) {
      case Pred::Eq: return l == r;
      case Pred::Ne: return l != r;
      case Pred::Slt: case Pred::Ult: return l < r;
      case Pred::Sle: case Pred::Ule: return l <= r;
      case Pred::Sgt: case Pred::Ugt: return l > r;
      case Pred::Sge: case Pred::Uge: return l >= r;
      }
      return false;
    };
    const bool is_unsigned = inst.pred == Pred::Ult || inst.pred == Pred::Ule ||
                             inst.pred == Pred::Ugt || inst.pred == Pred::Uge;
    if (a.is_ptr() || b.is_ptr()) {
      if (a.is_ptr() && b.is_ptr()) {
        if (inst.pred == Pred::Eq || inst.pred == Pred::Ne)
          res = cmp(std::pair(a.alloc, a.payload), std::pair(b.alloc, b.payload));
        else
          res = cmp(std::pair(a.alloc, a.payload), std::pair(b.alloc, b.payload));
      } else if (inst.pred == Pred::Eq || inst.pred == Pred::Ne) {
        res = inst.pred == Pred::Ne; // a pointer never equals an integer
      } else {
        raise(th, FaultKind::Unsupported, "ordered comparison of pointer and integer");
        break;
      }
    } else {
      const unsigned w = std::max(a.width, b.width);
      if (is_unsigned)
        res = cmp(static_cast<std::uint64_t>(a.payload) & width_mask(w),
                  static_cast<std::uint64_t>(b.payload) & width_mask(w));
      else
        res = cmp(a.payload, b.payload);
    }
    set_result(Value::integer(res ? 1 : 0, 1));
    advance();
    break;
  }
  case Opcode::Gep: {
    Value base = arg(0), off = arg(1);
    if (!off.is_int()) {
      raise(th, FaultKind::Unsupported, "non-integer gep offset " + off.str());
      break;
    }
    if (base.is_ptr())
      set_result(Value::pointer(base.alloc, base.payload + off.payload));
    else if (base.is_int())
      set_result(Value::integer(base.payload + off.payload, 8));
    else {
      raise(th, FaultKind::Unsupported, "gep on " + base.str());
      break;
    }
    advance();
    break;
  }
  case Opcode::Br: {
    std::size_t target = ci.targets[0];
    if (!ci.ops.empty() && !truthy(arg(0)))
      target = ci.targets[1];
    fr.block = target;
    fr.instr = 0;
    break;
  }
  case Opcode::Assert: {
    if (truthy(arg(0))) {
      advance();
      break;
    }
    Event e = make_event(th, EventKind::AssertFail, inst.loc);
    emit(e);
    raise(th, FaultKind::AssertViolation, "assertion failed");
    break;
  }
  case Opcode::Panic: {
    Event e = make_event(th, EventKind::PanicEvt, inst.loc);
    e.message = inst.message;
    emit(e);
    raise(th, FaultKind::Panic, inst.message);
    break;
  }
  case Opcode::Ret: {
    Value ret = ci.ops.empty() ? Value::integer(0, 8) : arg(0);
    if (th.stack.size() == 1) {
      // Allocations of a thread's outermost frame outlive it: other threads
      // may still hold pointers to them, as with leaked or shared boxes.
      Event e = make_event(th, EventKind::ThreadEnd, inst.loc);
      e.written_value = ret;
      finish_thread(th, ret);
      emit(std::move(e));
      break;
    }
    for (const AllocId &id : fr.allocas)
      if (Allocation *a = memory_.find(id))
        a->live = false;
    const std::int32_t slot = fr.result_slot;
    th.stack.pop_back(); // invalidates fr
    Frame &caller = th.stack.back();
    if (slot >= 0) {
      caller.regs[static_cast<std::size_t>(slot)] = ret;
      caller.defined[static_cast<std::size_t>(slot)] = true;
    }
    break;
  }
  case Opcode::GlobalRef:
    set_result(Value::pointer({-1, static_cast<std::uint32_t>(std::max<std::int64_t>(ci.callee, 0))}, 0));
    advance();
    break;
  case Opcode::BoundExceeded:
    th.status = ThreadStatus::Faulted;
    outcome_ = Outcome::BoundExceeded;
    break;
  }
  update_outcome();
  return emitted;
}

namespace {

// Instructions that touch no shared state and cannot block or emit events.
bool is_local(const Interpreter &in, const CompiledProgram &prog, const ThreadState &th) {
  if (th.status != ThreadStatus::Runnable || th.stack.empty())
    return false;
  const Frame &fr = th.stack.back();
  const CInstr &ci = prog.functions[fr.function].blocks[fr.block][fr.instr];
  switch (ci.src->op) {
  case Opcode::BinOp:
  case Opcode::Icmp:
  case Opcode::Gep:
  case Opcode::Br:
  case Opcode::GlobalRef:
  case Opcode::Call:
    return true;
  case Opcode::Ret:
    return th.stack.size() > 1;
  case Opcode::Assert: {
    ExecImpl x{const_cast<Interpreter &>(in), prog, const_cast<MemoryState &>(in.memory())};
    return truthy(x.eval(fr, ci.ops[0]));
  }
  default:
    return false;
  }
}

} // namespace

std::optional<Event> Interpreter::transition(Tid t) {
  std::optional<Event> e;
  schedule_.push_back(t);
  while (!e && is_enabled(t))
    e = step(t);
  // Settle: run the thread's local instructions so that its next transition
  // starts at a visible instruction.
  while (!done() && is_local(*this, *prog_, threads_[static_cast<std::size_t>(t)]))
    step(t);
  return e;
}

std::optional<Event> Interpreter::peek(Tid t) const {
  if (!is_enabled(t))
    return std::nullopt;
  const ThreadState &th = threads_[static_cast<std::size_t>(t)];
  std::optional<Opcode> op;
  if (th.status == ThreadStatus::Runnable && !th.stack.empty()) {
    const Frame &fr = th.stack.back();
    op = prog_->functions[fr.function].blocks[fr.block][fr.instr].src->op;
  }
  Interpreter copy = *this;
  if (auto e = copy.transition(t))
    return e;
  if (!copy.fault_ || !copy.fault_->loc || !op)
    return std::nullopt;
  Event e;
  e.tid = t;
  e.seq = th.next_seq;
  e.kind = *op == Opcode::Load ? EventKind::Read : *op == Opcode::Store ? EventKind::Write : EventKind::Rmw;
  e.loc = *copy.fault_->loc;
  e.src = copy.fault_->src;
  return e;
}

Trace Interpreter::trace() const {
  Trace tr;
  tr.events = events_;
  tr.final_memory = memory_;
  tr.outcome = outcome_;
  tr.fault = fault_;
  tr.schedule = schedule_;
  for (const auto &th : threads_) {
    tr.thread_parent.push_back(th.parent);
    tr.thread_spawn_index.push_back(th.spawn_index);
  }
  return tr;
}

Trace run_schedule(const Program &program, const std::vector<Tid> &schedule, ExecConfig config) {
  Interpreter in(program, config);
  std::vector<std::string> notes;
  for (std::size_t i = 0; i < schedule.size() && !in.done(); ++i) {
    if (!in.is_enabled(schedule[i])) {
      notes.push_back("schedule entry " + std::to_string(i) + ": thread " + std::to_string(schedule[i]) +
                      " not enabled, skipped");
      continue;
    }
    in.transition(schedule[i]);
  }
  while (!in.done()) {
    auto en = in.enabled();
    if (en.empty())
      break;
    in.transition(en.front());
  }
  Trace tr = in.trace();
  tr.notes = std::move(notes);
  return tr;
}

std::string format_location(const Location &loc, const MemoryState *mem) {
  std::string base;
  if (loc.alloc.owner < 0) {
    const Allocation *a = mem ? mem->find(loc.alloc) : nullptr;
    base = a ? "@" + a->name : "g" + std::to_string(loc.alloc.index);
  } else {
    base = "a" + std::to_string(loc.alloc.owner) + "." + std::to_string(loc.alloc.index);
  }
  return base + "+" + std::to_string(loc.offset);
}

namespace {

std::string format_event_with(const Event &e, const MemoryState *mem) {
  std::ostringstream os;
  os << e.tid << " " << e.seq << " " << to_string(e.kind) << " ";
  if (e.is_access() || e.kind == EventKind::Alloc)
    os << format_location(e.loc, mem) << " " << e.loc.width;
  else
    os << "- -";
  os << " ";
  switch (e.kind) {
  case EventKind::Read: os << e.read_value.str(); break;
  case EventKind::Write: os << e.written_value.str(); break;
  case EventKind::Rmw: os << e.read_value.str() << "->" << e.written_value.str(); break;
  case EventKind::ThreadCreate: os << "t" << e.other; break;
  case EventKind::ThreadJoin: os << "t" << e.other << "=" << e.read_value.str(); break;
  case EventKind::ThreadEnd: os << e.written_value.str(); break;
  default: os << "-"; break;
  }
  os << " " << (e.atomic ? "atomic" : "plain") << " " << to_string(e.ordering);
  os << " " << (e.src.file.empty() ? "?" : e.src.str());
  if (e.is_init_store)
    os << " init";
  return os.str();
}

} // namespace

std::string format_event(const Event &e) { return format_event_with(e, nullptr); }

std::string format_trace(const Trace &t, bool show_init) {
  std::ostringstream os;
  for (const auto &e : t.events) {
    if (e.is_init_store && !show_init)
      continue;
    os << format_event_with(e, &t.final_memory) << "\n";
  }
  switch (t.outcome) {
  case Outcome::Completed: os << "outcome completed\n"; break;
  case Outcome::BoundExceeded: os << "outcome bound-exceeded\n"; break;
  case Outcome::Running: os << "outcome running\n"; break;
  case Outcome::Faulted:
    os << "outcome faulted " << to_string(t.fault->kind) << " t" << t.fault->tid << " "
       << (t.fault->src.file.empty() ? "?" : t.fault->src.str()) << " " << t.fault->message << "\n";
    break;
  }
  for (const auto &n : t.notes)
    os << "note " << n << "\n";
  return os.str();
}

} // namespace minimc
