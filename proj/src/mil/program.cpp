#include "duct/mil.hpp"

#include <array>
#include <utility>

namespace duct {

namespace {

constexpr std::array<std::pair<Opcode, std::string_view>, 26> kOpcodeNames{{
    {Opcode::ldc, "ldc"},         {Opcode::ldloc, "ldloc"},     {Opcode::stloc, "stloc"},
    {Opcode::ldarg, "ldarg"},     {Opcode::starg, "starg"},     {Opcode::ldloca, "ldloca"},
    {Opcode::ldarga, "ldarga"},   {Opcode::ldfld, "ldfld"},     {Opcode::stfld, "stfld"},
    {Opcode::ldflda, "ldflda"},   {Opcode::ldelem, "ldelem"},   {Opcode::stelem, "stelem"},
    {Opcode::ldelema, "ldelema"}, {Opcode::ldind, "ldind"},     {Opcode::stind, "stind"},
    {Opcode::call, "call"},       {Opcode::callvirt, "callvirt"}, {Opcode::newobj, "newobj"},
    {Opcode::ret, "ret"},         {Opcode::br, "br"},           {Opcode::brtrue, "brtrue"},
    {Opcode::brfalse, "brfalse"}, {Opcode::label, "label"},     {Opcode::pop, "pop"},
    {Opcode::dup, "dup"},         {Opcode::binop, "binop"},
}};

}  // namespace

std::string_view opcode_name(Opcode op) {
  for (const auto& [code, name] : kOpcodeNames) {
    if (code == op) return name;
  }
  return "?";
}

std::optional<Opcode> opcode_from_name(std::string_view name) {
  for (const auto& [code, n] : kOpcodeNames) {
    if (n == name) return code;
  }
  return std::nullopt;
}

bool is_store(Opcode op) {
  switch (op) {
    case Opcode::starg:
    case Opcode::stelem:
    case Opcode::stind:
    case Opcode::stfld:
    case Opcode::stloc:
      return true;
    default:
      return false;
  }
}

bool is_branch(Opcode op) {
  return op == Opcode::br || op == Opcode::brtrue || op == Opcode::brfalse;
}

bool is_call(Opcode op) {
  return op == Opcode::call || op == Opcode::callvirt || op == Opcode::newobj;
}

bool ends_control(Opcode op) { return op == Opcode::br || op == Opcode::ret; }

std::string Program::method_name(MethodId id) const {
  const auto& m = method(id);
  return klass(m.owner).name + "::" + m.name;
}

std::string Program::field_name(FieldId id) const {
  const auto& f = field(id);
  return klass(f.owner).name + "." + f.name;
}

std::string Program::var_name(MethodId m, VarRef v) const {
  const auto& md = method(m);
  return v.kind == VarKind::local ? md.locals.at(v.slot) : md.params.at(v.slot).name;
}

std::string Program::describe(const VariableId& v) const {
  std::string out = var_name(v.method, v.var);
  switch (v.selector.kind) {
    case Selector::Kind::none:
      break;
    case Selector::Kind::field:
      out += "." + field(v.selector.field).name;
      break;
    case Selector::Kind::element:
      out += "[]";
      break;
  }
  return out;
}

std::optional<MethodId> Program::find_method(std::string_view qualified) const {
  auto sep = qualified.find("::");
  if (sep == std::string_view::npos) return std::nullopt;
  auto cls = find_class(qualified.substr(0, sep));
  if (!cls) return std::nullopt;
  auto name = qualified.substr(sep + 2);
  for (MethodId id : klass(*cls).methods) {
    if (method(id).name == name) return id;
  }
  return std::nullopt;
}

std::optional<ClassId> Program::find_class(std::string_view name) const {
  for (std::uint32_t i = 0; i < classes.size(); ++i) {
    if (classes[i].name == name) return ClassId{i};
  }
  return std::nullopt;
}

std::optional<FieldId> Program::find_field(ClassId cls, std::string_view name) const {
  std::optional<ClassId> cur = cls;
  // Bounded walk: the loader rejects cyclic hierarchies, but find_field is
  // also used while the loader is still checking.
  for (std::size_t steps = 0; cur && steps <= classes.size(); ++steps) {
    for (FieldId f : klass(*cur).fields) {
      if (field(f).name == name) return f;
    }
    cur = klass(*cur).parent;
  }
  return std::nullopt;
}

std::optional<std::uint32_t> Program::find_source_file(std::string_view name) const {
  for (std::uint32_t i = 0; i < source_files.size(); ++i) {
    if (source_files[i] == name) return i;
  }
  return std::nullopt;
}

StackEffect Program::stack_effect(const Instruction& ins) const {
  switch (ins.op) {
    case Opcode::ldc:
    case Opcode::ldloc:
    case Opcode::ldarg:
    case Opcode::ldloca:
    case Opcode::ldarga:
      return {0, 1};
    case Opcode::stloc:
    case Opcode::starg:
    case Opcode::pop:
    case Opcode::brtrue:
    case Opcode::brfalse:
      return {1, 0};
    case Opcode::ldfld:
    case Opcode::ldflda:
    case Opcode::ldind:
      return {1, 1};
    case Opcode::stfld:
    case Opcode::stind:
      return {2, 0};
    case Opcode::ldelem:
    case Opcode::ldelema:
    case Opcode::binop:
      return {2, 1};
    case Opcode::stelem:
      return {3, 0};
    case Opcode::dup:
      return {1, 2};
    case Opcode::call:
    case Opcode::callvirt: {
      const auto& callee = method(ins.method);
      return {static_cast<int>(callee.arity()), callee.returns_value ? 1 : 0};
    }
    case Opcode::newobj:
      return {static_cast<int>(method(ins.method).arity()), 1};
    case Opcode::ret:
      return {0, 0};  // the loader checks the depth at ret separately
    case Opcode::br:
    case Opcode::label:
      return {0, 0};
  }
  return {0, 0};
}

std::size_t Program::instruction_count() const {
  std::size_t n = 0;
  for (const auto& m : methods) n += m.body.size();
  return n;
}

LoadError::LoadError(std::uint32_t line, std::uint32_t column, const std::string& what)
    : std::runtime_error(std::to_string(line) + ":" + std::to_string(column) + ": " + what),
      line_(line),
      column_(column) {}

std::string_view reason_code(ResolveError::Reason r) {
  switch (r) {
    case ResolveError::Reason::no_method:
      return "no_method";
    case ResolveError::Reason::not_in_scope:
      return "not_in_scope";
    case ResolveError::Reason::never_read:
      return "never_read";
    case ResolveError::Reason::bad_occurrence:
      return "bad_occurrence";
  }
  return "unknown";
}

bool structurally_equal(const Program& a, const Program& b) {
  if (a.source_files != b.source_files) return false;
  if (a.classes.size() != b.classes.size() || a.methods.size() != b.methods.size() ||
      a.fields.size() != b.fields.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.classes.size(); ++i) {
    const auto& x = a.classes[i];
    const auto& y = b.classes[i];
    if (x.name != y.name || x.parent != y.parent || x.fields != y.fields ||
        x.methods != y.methods) {
      return false;
    }
  }
  for (std::size_t i = 0; i < a.fields.size(); ++i) {
    if (a.fields[i].owner != b.fields[i].owner || a.fields[i].name != b.fields[i].name) {
      return false;
    }
  }
  for (std::size_t i = 0; i < a.methods.size(); ++i) {
    const auto& x = a.methods[i];
    const auto& y = b.methods[i];
    if (x.owner != y.owner || x.name != y.name || x.locals != y.locals ||
        x.virtual_flag != y.virtual_flag || x.override_flag != y.override_flag ||
        x.returns_value != y.returns_value || x.line_map != y.line_map ||
        x.stack_depth != y.stack_depth || x.params.size() != y.params.size() ||
        x.body.size() != y.body.size()) {
      return false;
    }
    for (std::size_t p = 0; p < x.params.size(); ++p) {
      if (x.params[p].name != y.params[p].name || x.params[p].byref != y.params[p].byref) {
        return false;
      }
    }
    for (std::size_t k = 0; k < x.body.size(); ++k) {
      const auto& s = x.body[k];
      const auto& t = y.body[k];
      if (s.op != t.op || s.operand != t.operand || s.var != t.var || s.field != t.field ||
          s.method != t.method || s.target != t.target) {
        return false;
      }
    }
  }
  return true;
}

}  // namespace duct
