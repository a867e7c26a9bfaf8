#pragma once

// Deterministic interpreter for linked MCIR programs. Executes one thread at
// a time under sequential consistency and emits the event stream consumed by
// the explorer.

#include "minimc/ir.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace minimc {

using Tid = int;

// Allocations are named by their owner thread and the owner's allocation
// counter, so identities do not depend on how threads interleave. Globals
// have owner -1.
struct AllocId {
  std::int32_t owner = -1;
  std::uint32_t index = 0;

  bool operator==(const AllocId &) const = default;
  auto operator<=>(const AllocId &) const = default;
};

struct Value {
  enum class Kind : std::uint8_t { Int, Ptr, Undef, ThreadHandle };

  Kind kind = Kind::Int;
  unsigned width = 8;       // Int: byte width
  std::int64_t payload = 0; // Int: value (sign-extended); Ptr: offset; ThreadHandle: tid
  AllocId alloc;            // Ptr only

  static Value integer(std::int64_t v, unsigned width = 8);
  static Value pointer(AllocId a, std::int64_t offset) { return {Kind::Ptr, 8, offset, a}; }
  static Value undef() { return {Kind::Undef, 8, 0, {}}; }
  static Value thread(Tid t) { return {Kind::ThreadHandle, 8, t, {}}; }

  bool is_int() const { return kind == Kind::Int; }
  bool is_ptr() const { return kind == Kind::Ptr; }
  bool operator==(const Value &) const = default;
  std::string str() const;
};

// Truncates to `width` bytes and sign-extends back to 64 bits.
std::int64_t wrap_to_width(std::int64_t v, unsigned width);

struct Location {
  AllocId alloc;
  std::int64_t offset = 0;
  unsigned width = 0;

  bool operator==(const Location &) const = default;
  bool overlaps(const Location &o) const {
    return alloc == o.alloc && offset < o.offset + static_cast<std::int64_t>(o.width) &&
           o.offset < offset + static_cast<std::int64_t>(width);
  }
};

enum class EventKind : std::uint8_t {
  Read,
  Write,
  Rmw,
  ThreadCreate,
  ThreadJoin,
  AssertFail,
  PanicEvt,
  Alloc,
  ThreadStart,
  ThreadEnd,
};

std::string_view to_string(EventKind k);

struct Event {
  Tid tid = 0;
  unsigned seq = 0;
  EventKind kind = EventKind::ThreadStart;
  Location loc;         // memory kinds and Alloc
  Value read_value;     // Read, Rmw, ThreadJoin (joined value)
  Value written_value;  // Write, Rmw
  bool atomic = false;
  Ordering ordering = Ordering::None;
  bool is_init_store = false;
  Tid other = -1;       // ThreadCreate: child; ThreadJoin: joined thread
  SrcLoc src;
  std::string message;  // PanicEvt

  bool is_access() const {
    return kind == EventKind::Read || kind == EventKind::Write || kind == EventKind::Rmw;
  }
  bool is_write() const { return kind == EventKind::Write || kind == EventKind::Rmw; }
  bool is_read() const { return kind == EventKind::Read || kind == EventKind::Rmw; }
  bool operator==(const Event &) const = default;
};

enum class FaultKind : std::uint8_t {
  OutOfBounds,
  UninitializedRead,
  AssertViolation,
  Panic,
  CallDepthExceeded,
  Unsupported,
};

std::string_view to_string(FaultKind k);

struct Fault {
  FaultKind kind = FaultKind::Panic;
  Tid tid = 0;
  SrcLoc src;
  std::string message;
  std::optional<Location> loc; // attempted access, for memory faults

  bool operator==(const Fault &) const = default;
};

struct Allocation {
  AllocId id;
  std::string name; // global name, or empty for stack allocations
  std::vector<std::uint8_t> bytes;
  std::vector<bool> init;
  // Per byte: index+1 into the owning MemoryState's boxed values (0 = none),
  // so whole 8-byte reloads recover symbolic pointers and handles.
  std::vector<std::uint32_t> box;
  std::vector<std::uint8_t> box_byte;
  bool live = true;

  bool operator==(const Allocation &) const = default;
};

struct MemoryState {
  std::vector<Allocation> allocations;
  std::vector<Value> boxes;

  const Allocation *find(AllocId id) const;
  Allocation *find(AllocId id);
  const Allocation *find_global(std::string_view name) const;
  bool operator==(const MemoryState &) const = default;
};

enum class ThreadStatus : std::uint8_t { NotStarted, Runnable, BlockedOnJoin, Finished, Faulted };

struct Frame {
  std::size_t function = 0;
  std::size_t block = 0;
  std::size_t instr = 0;
  std::vector<Value> regs;
  std::vector<bool> defined;
  std::vector<AllocId> allocas;
  std::int32_t result_slot = -1; // caller register receiving the return value
};

struct ThreadState {
  Tid tid = 0;
  Tid parent = -1;
  unsigned spawn_index = 0; // position among the parent's spawns
  std::vector<Frame> stack;
  ThreadStatus status = ThreadStatus::NotStarted;
  Tid join_target = -1;
  Value return_value;
  unsigned next_seq = 0;
  std::uint32_t next_alloc = 0;
  unsigned spawned = 0;
};

enum class Outcome : std::uint8_t { Completed, Faulted, BoundExceeded, Running };

struct Trace {
  std::vector<Event> events;
  MemoryState final_memory;
  Outcome outcome = Outcome::Running;
  std::optional<Fault> fault;
  std::vector<Tid> schedule;       // thread chosen for each transition
  std::vector<std::string> notes;  // skipped schedule entries and similar
  std::vector<Tid> thread_parent;  // parent of each tid (-1 for main)
  std::vector<unsigned> thread_spawn_index;
};

struct ExecConfig {
  unsigned max_call_depth = 64;
  unsigned max_threads = 16;
};

class CompiledProgram;

// Interpreter state for one execution. Copyable, so the explorer can branch
// from any point without replaying.
class Interpreter {
public:
  Interpreter(std::shared_ptr<const CompiledProgram> program, ExecConfig config = {});
  explicit Interpreter(const Program &program, ExecConfig config = {});

  // Threads whose next transition can execute now.
  std::vector<Tid> enabled() const;
  bool is_enabled(Tid t) const;
  bool done() const { return outcome_ != Outcome::Running; }

  // Executes exactly one instruction of `t` (or the thread-start step) and
  // returns the emitted event, if any.
  std::optional<Event> step(Tid t);

  // Executes instructions of `t` until it emits an event, blocks, finishes or
  // faults. Returns the event of the transition, if one was emitted.
  std::optional<Event> transition(Tid t);

  const std::vector<Event> &events() const { return events_; }
  const MemoryState &memory() const { return memory_; }
  const std::vector<ThreadState> &threads() const { return threads_; }
  Outcome outcome() const { return outcome_; }
  const std::optional<Fault> &fault() const { return fault_; }

  // The event the next transition of `t` would emit, computed on a copy of
  // this state. A transition that would fault on a memory access yields a
  // synthetic access event describing the attempted location.
  std::optional<Event> peek(Tid t) const;

  Trace trace() const;

private:
  friend class CompiledProgram;

  void start_thread(ThreadState &th);
  void finish_thread(ThreadState &th, Value ret);
  void raise(ThreadState &th, FaultKind kind, std::string message, std::optional<Location> loc = {});
  void update_outcome();
  Event make_event(ThreadState &th, EventKind kind, const SrcLoc &src);

  std::shared_ptr<const CompiledProgram> prog_;
  ExecConfig config_;
  MemoryState memory_;
  std::vector<ThreadState> threads_;
  std::vector<Event> events_;
  std::vector<Tid> schedule_;
  Outcome outcome_ = Outcome::Running;
  std::optional<Fault> fault_;
};

// Replays `schedule` (one entry per transition). Entries naming threads that
// are not enabled are skipped with a note; once the schedule is exhausted the
// lowest enabled thread runs until the program terminates.
Trace run_schedule(const Program &program, const std::vector<Tid> &schedule, ExecConfig config = {});

// `@name+off` for globals (when `mem` knows the name), `aT.I+off` otherwise.
std::string format_location(const Location &loc, const MemoryState *mem = nullptr);
std::string format_event(const Event &e);
std::string format_trace(const Trace &t, bool show_init = false);

} // namespace minimc
