#include "minimc/explore.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

namespace minimc {

namespace {

using ByteKey = std::tuple<std::int32_t, std::uint32_t, std::int64_t>;

ByteKey byte_key(const Location &l, std::int64_t off) { return {l.alloc.owner, l.alloc.index, l.offset + off}; }

std::size_t find_start(const Trace &t, Tid child) {
  for (std::size_t i = 0; i < t.events.size(); ++i)
    if (t.events[i].tid == child && t.events[i].kind == EventKind::ThreadStart)
      return i;
  return kInitEvent;
}

std::size_t find_end(const Trace &t, Tid tid) {
  for (std::size_t i = 0; i < t.events.size(); ++i)
    if (t.events[i].tid == tid && t.events[i].kind == EventKind::ThreadEnd)
      return i;
  return kInitEvent;
}

} // namespace

std::vector<VectorClock> happens_before(const Trace &trace) {
  std::vector<VectorClock> clocks(trace.events.size());
  std::map<Tid, VectorClock> current;
  std::map<Tid, std::size_t> creator; // child tid -> create event index
  std::map<Tid, std::size_t> ender;   // tid -> end event index
  std::map<ByteKey, std::size_t> last_writer;

  for (std::size_t i = 0; i < trace.events.size(); ++i) {
    const Event &e = trace.events[i];
    VectorClock c = current[e.tid];
    if (e.kind == EventKind::ThreadStart) {
      if (auto it = creator.find(e.tid); it != creator.end())
        c.join(clocks[it->second]);
    } else if (e.kind == EventKind::ThreadJoin) {
      if (auto it = ender.find(e.other); it != ender.end())
        c.join(clocks[it->second]);
    } else if (e.is_read() && e.atomic) {
      for (unsigned b = 0; b < e.loc.width; ++b) {
        auto it = last_writer.find(byte_key(e.loc, b));
        if (it == last_writer.end())
          continue;
        const Event &w = trace.events[it->second];
        if (w.atomic && !w.is_init_store)
          c.join(clocks[it->second]);
      }
    }
    c.set(e.tid, e.seq + 1);
    clocks[i] = c;
    current[e.tid] = c;

    if (e.kind == EventKind::ThreadCreate)
      creator[e.other] = i;
    else if (e.kind == EventKind::ThreadEnd)
      ender[e.tid] = i;
    if (e.is_write())
      for (unsigned b = 0; b < e.loc.width; ++b)
        last_writer[byte_key(e.loc, b)] = i;
  }
  return clocks;
}

bool ordered_before(const std::vector<VectorClock> &clocks, const Trace &trace, std::size_t a, std::size_t b) {
  const Event &ea = trace.events[a];
  return clocks[b].get(ea.tid) >= ea.seq + 1;
}

ExecutionGraph build_graph(const Trace &trace) {
  ExecutionGraph g;
  g.events = trace.events;
  g.memory = trace.final_memory;
  g.outcome = trace.outcome;
  g.fault = trace.fault;

  std::map<Tid, std::size_t> last_of_thread;
  std::map<ByteKey, std::size_t> last_writer;
  std::set<std::pair<std::size_t, std::size_t>> co;

  for (std::size_t i = 0; i < trace.events.size(); ++i) {
    const Event &e = trace.events[i];
    if (auto it = last_of_thread.find(e.tid); it != last_of_thread.end())
      g.po.emplace_back(it->second, i);
    last_of_thread[e.tid] = i;

    if (e.kind == EventKind::ThreadCreate) {
      if (std::size_t s = find_start(trace, e.other); s != kInitEvent)
        g.tc.emplace_back(i, s);
    } else if (e.kind == EventKind::ThreadJoin) {
      if (std::size_t s = find_end(trace, e.other); s != kInitEvent)
        g.tj.emplace_back(s, i);
    }

    if (e.is_read()) {
      // One rf entry per maximal byte range served by the same writer.
      std::optional<ReadsFrom> cur;
      for (unsigned b = 0; b < e.loc.width; ++b) {
        auto it = last_writer.find(byte_key(e.loc, b));
        std::size_t w = it == last_writer.end() ? kInitEvent : it->second;
        if (cur && cur->write == w) {
          cur->last_byte = b;
          continue;
        }
        if (cur)
          g.rf.push_back(*cur);
        cur = ReadsFrom{w, i, b, b};
      }
      if (cur)
        g.rf.push_back(*cur);
    }
    if (e.is_write()) {
      for (unsigned b = 0; b < e.loc.width; ++b) {
        ByteKey k = byte_key(e.loc, b);
        auto it = last_writer.find(k);
        if (it != last_writer.end())
          co.emplace(it->second, i);
        else if (e.loc.alloc.owner < 0)
          co.emplace(kInitEvent, i);
        last_writer[k] = i;
      }
    }
  }
  g.co.assign(co.begin(), co.end());
  return g;
}

bool is_acyclic(const ExecutionGraph &g) {
  const std::size_t n = g.events.size();
  std::vector<std::vector<std::size_t>> succ(n);
  std::vector<std::size_t> indeg(n, 0);
  auto add = [&](std::size_t a, std::size_t b) {
    if (a == kInitEvent || b == kInitEvent || a >= n || b >= n)
      return;
    succ[a].push_back(b);
    ++indeg[b];
  };
  for (auto [a, b] : g.po) add(a, b);
  for (auto [a, b] : g.co) add(a, b);
  for (auto [a, b] : g.tc) add(a, b);
  for (auto [a, b] : g.tj) add(a, b);
  for (const auto &r : g.rf) add(r.write, r.read);

  std::vector<std::size_t> ready;
  for (std::size_t i = 0; i < n; ++i)
    if (indeg[i] == 0)
      ready.push_back(i);
  std::size_t seen = 0;
  while (!ready.empty()) {
    std::size_t v = ready.back();
    ready.pop_back();
    ++seen;
    for (std::size_t s : succ[v])
      if (--indeg[s] == 0)
        ready.push_back(s);
  }
  return seen == n;
}

std::vector<Race> detect_races(const Trace &trace) {
  const auto clocks = happens_before(trace);
  const auto &ev = trace.events;
  std::vector<Race> out;
  std::set<std::pair<std::string, std::string>> seen;
  for (std::size_t j = 0; j < ev.size(); ++j) {
    const Event &b = ev[j];
    if (!b.is_access() || b.is_init_store)
      continue;
    for (std::size_t i = 0; i < j; ++i) {
      const Event &a = ev[i];
      if (!a.is_access() || a.is_init_store || a.tid == b.tid)
        continue;
      if (!a.is_write() && !b.is_write())
        continue;
      if (a.atomic && b.atomic)
        continue;
      if (!a.loc.overlaps(b.loc) || ordered_before(clocks, trace, i, j))
        continue;
      if (!seen.emplace(a.src.str(), b.src.str()).second)
        continue;
      out.push_back({i, j});
    }
  }
  return out;
}

bool dependent(const Event &a, const Event &b) {
  if (a.tid == b.tid)
    return true;
  if (a.is_access() && b.is_access())
    return !a.is_init_store && !b.is_init_store && (a.is_write() || b.is_write()) && a.loc.overlaps(b.loc);
  auto spawn_pair = [](const Event &c, const Event &s) {
    return c.kind == EventKind::ThreadCreate && s.kind == EventKind::ThreadStart && c.other == s.tid;
  };
  auto join_pair = [](const Event &end, const Event &j) {
    return end.kind == EventKind::ThreadEnd && j.kind == EventKind::ThreadJoin && j.other == end.tid;
  };
  return spawn_pair(a, b) || spawn_pair(b, a) || join_pair(a, b) || join_pair(b, a);
}

namespace {

// Interleaving-independent names: a thread is identified by its spawn path
// from main, e.g. "0", "0.1", "0.1.0".
std::vector<std::string> thread_keys(const Trace &t) {
  std::vector<std::string> keys(t.thread_parent.size());
  for (std::size_t i = 0; i < keys.size(); ++i) {
    std::vector<unsigned> path;
    for (Tid c = static_cast<Tid>(i); c >= 0 && t.thread_parent[static_cast<std::size_t>(c)] >= 0;
         c = t.thread_parent[static_cast<std::size_t>(c)])
      path.push_back(t.thread_spawn_index[static_cast<std::size_t>(c)]);
    std::string k = "m";
    for (auto it = path.rbegin(); it != path.rend(); ++it)
      k += "." + std::to_string(*it);
    keys[i] = k;
  }
  return keys;
}

std::string key_of(const std::vector<std::string> &keys, Tid t) {
  return t >= 0 && static_cast<std::size_t>(t) < keys.size() ? keys[static_cast<std::size_t>(t)]
                                                             : "t" + std::to_string(t);
}

std::string alloc_key(const std::vector<std::string> &keys, AllocId a) {
  return (a.owner < 0 ? std::string("g") : key_of(keys, a.owner)) + "#" + std::to_string(a.index);
}

std::string value_key(const std::vector<std::string> &keys, const Value &v) {
  switch (v.kind) {
  case Value::Kind::Int: return std::to_string(v.payload);
  case Value::Kind::Undef: return "undef";
  case Value::Kind::Ptr: return "&" + alloc_key(keys, v.alloc) + "+" + std::to_string(v.payload);
  case Value::Kind::ThreadHandle: return "thr:" + key_of(keys, static_cast<Tid>(v.payload));
  }
  return "?";
}

std::string event_key(const std::vector<std::string> &keys, const Event &e) {
  std::ostringstream os;
  os << key_of(keys, e.tid) << ":" << e.seq << ":" << to_string(e.kind);
  if (e.is_access() || e.kind == EventKind::Alloc)
    os << ":" << alloc_key(keys, e.loc.alloc) << "+" << e.loc.offset << "/" << e.loc.width;
  if (e.is_read())
    os << ":r=" << value_key(keys, e.read_value);
  if (e.is_write())
    os << ":w=" << value_key(keys, e.written_value);
  if (e.kind == EventKind::ThreadCreate || e.kind == EventKind::ThreadJoin)
    os << ":" << key_of(keys, e.other);
  return os.str();
}

} // namespace

std::string canonical_form(const Trace &trace) {
  const auto keys = thread_keys(trace);
  const auto &ev = trace.events;
  // A terminating transition that emitted an event cannot commute with
  // anything, so that event is pinned to its own final layer.
  std::size_t body = ev.size();
  bool terminal_event = trace.outcome != Outcome::Completed && !ev.empty() && ev.size() == trace.schedule.size();
  if (terminal_event)
    --body;

  std::vector<std::size_t> layer(body, 0);
  std::size_t depth = 0;
  for (std::size_t j = 0; j < body; ++j) {
    for (std::size_t i = 0; i < j; ++i)
      if (layer[i] + 1 > layer[j] && dependent(ev[i], ev[j]))
        layer[j] = layer[i] + 1;
    depth = std::max(depth, layer[j] + 1);
  }
  std::vector<std::vector<std::string>> layers(depth);
  for (std::size_t j = 0; j < body; ++j)
    layers[layer[j]].push_back(event_key(keys, ev[j]));

  std::ostringstream os;
  for (auto &l : layers) {
    std::sort(l.begin(), l.end());
    os << "[";
    for (std::size_t i = 0; i < l.size(); ++i)
      os << (i ? " " : "") << l[i];
    os << "]";
  }
  if (terminal_event)
    os << "[" << event_key(keys, ev.back()) << "]";
  switch (trace.outcome) {
  case Outcome::Completed: break;
  case Outcome::Running: os << "!running"; break;
  case Outcome::BoundExceeded: os << "!bound"; break;
  case Outcome::Faulted:
    os << "!" << to_string(trace.fault->kind) << "@" << key_of(keys, trace.fault->tid) << ":" << trace.fault->src.str();
    break;
  }
  return os.str();
}

} // namespace minimc
