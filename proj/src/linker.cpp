#include "minimc/ir.hpp"

#include <algorithm>
#include <set>

namespace minimc {

Program link(const std::vector<NamedModule> &modules,
             const std::vector<std::string> &threading_symbols) {
  if (modules.empty())
    throw LinkError(LinkError::Kind::NoModules, "");

  Program prog;
  std::set<std::string> defined;
  auto define = [&](const std::string &name, const std::string &module) {
    if (!defined.insert(name).second)
      throw LinkError(LinkError::Kind::DuplicateDefinition, name);
    prog.link_map[name] = module;
  };

  std::vector<ExternDecl> declared;
  for (const auto &[name, mod] : modules) {
    for (const auto &g : mod.globals) {
      define(g.name, name);
      prog.globals.push_back(g);
    }
    for (const auto &f : mod.functions) {
      define(f.name, name);
      prog.functions.push_back(f);
    }
    for (const auto &e : mod.externs)
      declared.push_back(e);
  }

  auto by_name = [](const auto &a, const auto &b) { return a.name < b.name; };
  std::sort(prog.globals.begin(), prog.globals.end(), by_name);
  std::sort(prog.functions.begin(), prog.functions.end(), by_name);

  if (!prog.find_function("main"))
    throw LinkError(LinkError::Kind::NoMain, "main");

  std::set<std::string> threading(threading_symbols.begin(), threading_symbols.end());

  // Declarations either match a definition or stay as unresolved threading
  // externs for the interception pass.
  std::sort(declared.begin(), declared.end(), by_name);
  for (const auto &e : declared) {
    if (const Function *f = prog.find_function(e.name)) {
      if (f->params.size() != e.arity)
        throw LinkError(LinkError::Kind::ArityMismatch, e.name);
      continue;
    }
    if (prog.find_global(e.name))
      throw LinkError(LinkError::Kind::UnresolvedSymbol, e.name);
    if (!threading.count(e.name))
      continue; // checked against call sites below
    if (const ExternDecl *prev = prog.find_extern(e.name)) {
      if (prev->arity != e.arity)
        throw LinkError(LinkError::Kind::ArityMismatch, e.name);
      continue;
    }
    prog.externs.push_back(e);
  }

  for (auto &f : prog.functions)
    for (auto &bb : f.blocks)
      for (auto &inst : bb.instrs) {
        if (inst.op != Opcode::ExternCall)
          continue;
        if (prog.find_function(inst.callee))
          inst.op = Opcode::Call;
        else if (!threading.count(inst.callee))
          throw LinkError(LinkError::Kind::UnresolvedSymbol, inst.callee);
      }

  // Unused declarations of unknown symbols are harmless and dropped.
  return prog;
}

} // namespace minimc
