#include "minimc/report.hpp"

#include <algorithm>
#include <sstream>

namespace minimc {

namespace {

std::string access_text(const Event &e) {
  std::string s = e.atomic ? "atomic " + std::string(to_string(e.ordering)) : "non-atomic";
  return s + ", " + std::to_string(e.loc.width) + " byte" + (e.loc.width == 1 ? "" : "s");
}

std::string kind_word(const Event &e) {
  switch (e.kind) {
  case EventKind::Read: return "read";
  case EventKind::Write: return "write";
  case EventKind::Rmw: return "rmw";
  default: return std::string(to_string(e.kind));
  }
}

std::string src_text(const SrcLoc &s) { return s.file.empty() ? "?" : s.str(); }

std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\')
      out += '\\';
    out += c == '\n' ? ' ' : c;
  }
  return out;
}

} // namespace

std::string describe_event(const Event &e, const MemoryState *mem) {
  std::ostringstream os;
  std::string at = e.atomic ? std::string(to_string(e.ordering)) + " " : "";
  switch (e.kind) {
  case EventKind::Read:
    os << at << "load " << format_location(e.loc, mem) << " -> " << e.read_value.str();
    break;
  case EventKind::Write:
    os << at << "store " << format_location(e.loc, mem) << " <- " << e.written_value.str();
    break;
  case EventKind::Rmw:
    os << at << "rmw " << format_location(e.loc, mem) << " " << e.read_value.str() << " -> "
       << e.written_value.str();
    break;
  case EventKind::ThreadCreate: os << "spawn t" << e.other; break;
  case EventKind::ThreadJoin: os << "join t" << e.other; break;
  case EventKind::AssertFail: os << "assert failed"; break;
  case EventKind::PanicEvt: os << "panic \"" << e.message << "\""; break;
  case EventKind::Alloc: os << "alloca " << format_location(e.loc, mem) << " (" << e.loc.width << ")"; break;
  case EventKind::ThreadStart: os << "start"; break;
  case EventKind::ThreadEnd: os << "end"; break;
  }
  if (e.is_init_store)
    os << " [init]";
  os << "  " << src_text(e.src);
  return os.str();
}

std::string format_counterexample(const Verdict &v, bool show_init) {
  std::ostringstream os;
  os << "verdict: " << to_string(v.result);
  if (!v.diagnostic.empty())
    os << ": " << v.diagnostic;
  os << "\n";
  if (!v.witness)
    return os.str();
  const Trace &t = *v.witness;
  const MemoryState *mem = &t.final_memory;

  if (v.result == ResultKind::DataRace && v.event_a && v.event_b) {
    for (const Event *e : {&*v.event_a, &*v.event_b})
      os << "  t" << e->tid << " " << kind_word(*e) << " " << format_location(e->loc, mem) << " ("
         << access_text(*e) << ") at " << src_text(e->src) << "\n";
  } else if (t.fault) {
    os << "  t" << t.fault->tid << " " << to_string(t.fault->kind) << " at " << src_text(t.fault->src);
    if (t.fault->loc)
      os << " accessing " << format_location(*t.fault->loc, mem) << " (" << t.fault->loc->width << " bytes)";
    os << "\n";
  }

  std::vector<const Event *> shown;
  Tid max_tid = 0;
  for (const auto &e : t.events) {
    max_tid = std::max(max_tid, e.tid);
    if (show_init || !e.is_init_store)
      shown.push_back(&e);
  }
  std::vector<std::string> text;
  std::size_t width = 4;
  for (const Event *e : shown) {
    text.push_back(describe_event(*e, mem));
    width = std::max(width, text.back().size());
  }
  width += 3;
  const std::size_t num_w = std::to_string(shown.size()).size() + 2;

  os << "interleaving:\n";
  os << std::string(num_w, ' ');
  for (Tid c = 0; c <= max_tid; ++c) {
    std::string h = "t" + std::to_string(c);
    os << (c == max_tid ? h : h + std::string(width - h.size(), ' '));
  }
  os << "\n";
  for (std::size_t i = 0; i < shown.size(); ++i) {
    std::string n = std::to_string(i + 1);
    os << std::string(num_w - 1 - n.size(), ' ') << n << " ";
    os << std::string(width * static_cast<std::size_t>(shown[i]->tid), ' ') << text[i] << "\n";
  }
  if (t.fault)
    os << "fault: " << to_string(t.fault->kind) << " in t" << t.fault->tid << " at " << src_text(t.fault->src)
       << ": " << t.fault->message << "\n";
  else if (t.outcome == Outcome::BoundExceeded)
    os << "note: loop bound exceeded\n";
  return os.str();
}

std::string dump_dot(const ExecutionGraph &g) {
  std::ostringstream os;
  os << "digraph execution {\n  node [shape=box, fontname=\"monospace\"];\n";
  bool uses_init = std::any_of(g.rf.begin(), g.rf.end(), [](const ReadsFrom &r) { return r.write == kInitEvent; }) ||
                   std::any_of(g.co.begin(), g.co.end(), [](const auto &p) { return p.first == kInitEvent; });
  if (uses_init)
    os << "  init [label=\"init\", shape=ellipse];\n";
  auto name = [](std::size_t i) { return i == kInitEvent ? std::string("init") : "e" + std::to_string(i); };
  for (std::size_t i = 0; i < g.events.size(); ++i) {
    const Event &e = g.events[i];
    os << "  " << name(i) << " [label=\"t" << e.tid << "." << e.seq << " " << escape(describe_event(e, &g.memory))
       << "\"];\n";
  }
  for (auto [a, b] : g.po)
    os << "  " << name(a) << " -> " << name(b) << ";\n";
  std::set<std::pair<std::size_t, std::size_t>> rf_pairs;
  for (const auto &r : g.rf)
    rf_pairs.emplace(r.write, r.read);
  for (auto [w, r] : rf_pairs)
    os << "  " << name(w) << " -> " << name(r) << " [style=dashed, label=\"rf\"];\n";
  for (auto [a, b] : g.co)
    os << "  " << name(a) << " -> " << name(b) << " [style=dotted, label=\"co\"];\n";
  for (auto [a, b] : g.tc)
    os << "  " << name(a) << " -> " << name(b) << " [style=bold, label=\"tc\"];\n";
  for (auto [a, b] : g.tj)
    os << "  " << name(a) << " -> " << name(b) << " [style=bold, label=\"tj\"];\n";
  os << "}\n";
  return os.str();
}

namespace {
constexpr std::pair<ResultKind, std::string_view> kKeywords[] = {
    {ResultKind::OK, "OK"},         {ResultKind::DataRace, "race"},         {ResultKind::AssertViolation, "assert"},
    {ResultKind::OutOfBounds, "oob"}, {ResultKind::UninitializedRead, "uninit"}, {ResultKind::Panic, "panic"},
    {ResultKind::Unsupported, "unsupported"},
};
} // namespace

std::string_view result_keyword(ResultKind k) {
  for (auto [r, s] : kKeywords)
    if (r == k)
      return s;
  return "unsupported";
}

std::optional<ResultKind> parse_result_keyword(std::string_view s) {
  for (auto [r, w] : kKeywords)
    if (w == s)
      return r;
  return std::nullopt;
}

std::string machine_report(const Verdict &v) {
  std::ostringstream os;
  os << "result=" << result_keyword(v.result) << " executions=" << v.stats.executions_explored
     << " blocked=" << v.stats.blocked_explorations;
  if (v.event_a)
    os << " evA=" << src_text(v.event_a->src);
  else if (v.witness && v.witness->fault)
    os << " evA=" << src_text(v.witness->fault->src);
  if (v.event_b)
    os << " evB=" << src_text(v.event_b->src);
  if (v.stats.budget_exhausted)
    os << " incomplete=1";
  if (v.result == ResultKind::Unsupported)
    os << " diag=\"" << escape(v.diagnostic) << "\"";
  return os.str();
}

MachineRecord parse_machine_report(std::string_view line) {
  MachineRecord r;
  bool have_result = false, have_exec = false, have_blocked = false;
  std::size_t pos = 0;
  auto fail = [&](const std::string &why) { throw std::invalid_argument("malformed machine record: " + why); };
  auto number = [&](std::string_view s) {
    if (s.empty() || !std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; }))
      fail("expected a number, got '" + std::string(s) + "'");
    return std::stoull(std::string(s));
  };
  while (pos < line.size()) {
    if (line[pos] == ' ') {
      ++pos;
      continue;
    }
    std::size_t eq = line.find('=', pos);
    if (eq == std::string_view::npos)
      fail("field without '='");
    std::string_view key = line.substr(pos, eq - pos);
    std::string value;
    pos = eq + 1;
    if (pos < line.size() && line[pos] == '"') {
      ++pos;
      bool closed = false;
      while (pos < line.size()) {
        char c = line[pos++];
        if (c == '\\' && pos < line.size()) {
          value += line[pos++];
        } else if (c == '"') {
          closed = true;
          break;
        } else {
          value += c;
        }
      }
      if (!closed)
        fail("unterminated string");
    } else {
      std::size_t end = line.find(' ', pos);
      if (end == std::string_view::npos)
        end = line.size();
      value = std::string(line.substr(pos, end - pos));
      pos = end;
    }
    if (key == "result") {
      auto k = parse_result_keyword(value);
      if (!k)
        fail("unknown result '" + value + "'");
      r.result = *k;
      have_result = true;
    } else if (key == "executions") {
      r.executions = number(value);
      have_exec = true;
    } else if (key == "blocked") {
      r.blocked = number(value);
      have_blocked = true;
    } else if (key == "evA") {
      r.ev_a = value;
    } else if (key == "evB") {
      r.ev_b = value;
    } else if (key == "incomplete") {
      r.incomplete = value == "1";
    } else if (key == "diag") {
      r.diag = value;
    } else {
      fail("unknown key '" + std::string(key) + "'");
    }
  }
  if (!have_result || !have_exec || !have_blocked)
    fail("missing result, executions or blocked");
  return r;
}

std::string stats_line(const ExploreStats &s) {
  return "executions=" + std::to_string(s.executions_explored) + " blocked=" + std::to_string(s.blocked_explorations) +
         " max_events=" + std::to_string(s.events_max);
}

} // namespace minimc
