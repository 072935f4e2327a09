// Source-level queries (file, line, variable) to IL use sites.

#include <algorithm>
#include <set>

#include "duct/abstract_stack.hpp"
#include "duct/flowgraph.hpp"
#include "duct/mil.hpp"

namespace duct {

namespace {

struct VarSpec {
  std::string name;
  Selector::Kind selector = Selector::Kind::none;
  std::string field;
};

VarSpec parse_var_spec(std::string_view text) {
  VarSpec spec;
  if (text.size() > 2 && text.substr(text.size() - 2) == "[]") {
    spec.name = std::string(text.substr(0, text.size() - 2));
    spec.selector = Selector::Kind::element;
  } else if (auto dot = text.find('.'); dot != std::string_view::npos) {
    spec.name = std::string(text.substr(0, dot));
    spec.field = std::string(text.substr(dot + 1));
    spec.selector = Selector::Kind::field;
  } else {
    spec.name = std::string(text);
  }
  return spec;
}

std::optional<VarRef> lookup(const MethodDef& m, const std::string& name) {
  for (std::uint32_t i = 0; i < m.locals.size(); ++i) {
    if (m.locals[i] == name) return VarRef{VarKind::local, i};
  }
  for (std::uint32_t i = 0; i < m.params.size(); ++i) {
    if (m.params[i].name == name) return VarRef{VarKind::arg, i};
  }
  return std::nullopt;
}

bool is_direct_read(const Instruction& ins, VarRef v) {
  switch (ins.op) {
    case Opcode::ldloc:
    case Opcode::ldloca:
    case Opcode::ldarg:
    case Opcode::ldarga:
      return ins.var == v;
    default:
      return false;
  }
}

std::vector<MethodId> methods_covering(const Program& program, std::uint32_t file,
                                       std::uint32_t line) {
  std::vector<MethodId> out;
  for (std::uint32_t i = 0; i < program.methods.size(); ++i) {
    const auto& lm = program.methods[i].line_map;
    if (std::any_of(lm.begin(), lm.end(),
                    [&](const SourceLoc& s) { return s.file == file && s.line == line; })) {
      out.push_back(MethodId{i});
    }
  }
  std::sort(out.begin(), out.end(), [&](MethodId a, MethodId b) {
    return program.method_name(a) < program.method_name(b);
  });
  return out;
}

}  // namespace

std::vector<ReadMatch> reads_on_line(const Program& program, std::string_view file,
                                     std::uint32_t line, std::string_view variable) {
  auto file_idx = program.find_source_file(file);
  if (!file_idx) {
    throw ResolveError(ResolveError::Reason::no_method,
                       "no method covers " + std::string(file) + ":" + std::to_string(line));
  }
  auto covering = methods_covering(program, *file_idx, line);
  if (covering.empty()) {
    throw ResolveError(ResolveError::Reason::no_method,
                       "no method covers " + std::string(file) + ":" + std::to_string(line));
  }
  VarSpec spec = parse_var_spec(variable);
  std::optional<MethodId> method;
  std::optional<VarRef> var;
  for (MethodId id : covering) {
    if (auto v = lookup(program.method(id), spec.name)) {
      method = id;
      var = v;
      break;
    }
  }
  if (!method) {
    throw ResolveError(ResolveError::Reason::not_in_scope,
                       "variable '" + spec.name + "' is not in scope at " + std::string(file) + ":" +
                           std::to_string(line));
  }
  const auto& m = program.method(*method);
  std::vector<ReadMatch> out;
  std::optional<MethodStacks> stacks;
  for (std::uint32_t k = 0; k < m.body.size(); ++k) {
    if (m.line_map[k].file != *file_idx || m.line_map[k].line != line) continue;
    const auto& ins = m.body[k];
    VariableId vid{*method, *var, Selector::none()};
    if (spec.selector == Selector::Kind::none) {
      if (is_direct_read(ins, *var)) out.push_back({k, vid});
      continue;
    }
    bool field_read = spec.selector == Selector::Kind::field &&
                      (ins.op == Opcode::ldfld || ins.op == Opcode::ldflda) &&
                      program.field(ins.field).name == spec.field;
    bool elem_read = spec.selector == Selector::Kind::element &&
                     (ins.op == Opcode::ldelem || ins.op == Opcode::ldelema);
    if (!field_read && !elem_read) continue;
    if (!stacks) stacks = simulate_method(program, build_cfg(program, *method));
    const auto& before = stacks->before[k];
    const auto& base = field_read ? before[before.size() - 1] : before[before.size() - 2];
    if (base.tag != AbstractValue::Tag::value_of || base.var != *var) continue;
    vid.selector = field_read ? Selector::of_field(ins.field) : Selector::element();
    out.push_back({k, vid});
  }
  if (out.empty()) {
    throw ResolveError(ResolveError::Reason::never_read,
                       "variable '" + std::string(variable) + "' is never read at " +
                           std::string(file) + ":" + std::to_string(line));
  }
  return out;
}

UseSite resolve_use_site(const Program& program, std::string_view file, std::uint32_t line,
                         std::string_view variable, std::optional<std::uint32_t> occurrence) {
  auto reads = reads_on_line(program, file, line, variable);
  const ReadMatch* pick = &reads.back();
  if (occurrence) {
    if (*occurrence >= reads.size()) {
      throw ResolveError(ResolveError::Reason::bad_occurrence,
                         "occurrence " + std::to_string(*occurrence) + " out of range: '" +
                             std::string(variable) + "' is read " + std::to_string(reads.size()) +
                             " time(s) on that line");
    }
    pick = &reads[*occurrence];
  }
  return UseSite{pick->variable.method, pick->instr, pick->variable};
}

std::vector<std::string> variables_read_on_line(const Program& program, std::uint32_t file,
                                                std::uint32_t line) {
  std::set<std::string> names;
  for (std::uint32_t i = 0; i < program.methods.size(); ++i) {
    const auto& m = program.methods[i];
    for (std::uint32_t k = 0; k < m.body.size(); ++k) {
      if (m.line_map[k].file != file || m.line_map[k].line != line) continue;
      const auto& ins = m.body[k];
      if (is_direct_read(ins, ins.var)) names.insert(program.var_name(MethodId{i}, ins.var));
    }
  }
  return {names.begin(), names.end()};
}

}  // namespace duct
