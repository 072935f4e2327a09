// MiniIL: a small stack-based intermediate language with classes, virtual
// dispatch, by-reference parameters and per-instruction debug lines.

#pragma once

#include <cstdint>
#include <compare>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace duct {

enum class Opcode : std::uint8_t {
  ldc,
  ldloc,
  stloc,
  ldarg,
  starg,
  ldloca,
  ldarga,
  ldfld,
  stfld,
  ldflda,
  ldelem,
  stelem,
  ldelema,
  ldind,
  stind,
  call,
  callvirt,
  newobj,
  ret,
  br,
  brtrue,
  brfalse,
  label,
  pop,
  dup,
  binop,
};

std::string_view opcode_name(Opcode op);
std::optional<Opcode> opcode_from_name(std::string_view name);

// The five definition-producing opcodes.
bool is_store(Opcode op);
bool is_branch(Opcode op);
bool is_call(Opcode op);
// br and ret never fall through to the next instruction.
bool ends_control(Opcode op);

struct MethodId {
  std::uint32_t value = 0;
  auto operator<=>(const MethodId&) const = default;
};

struct ClassId {
  std::uint32_t value = 0;
  auto operator<=>(const ClassId&) const = default;
};

struct FieldId {
  std::uint32_t value = 0;
  auto operator<=>(const FieldId&) const = default;
};

enum class VarKind : std::uint8_t { local, arg };

// A local or parameter slot inside one method.
struct VarRef {
  VarKind kind = VarKind::local;
  std::uint32_t slot = 0;
  auto operator<=>(const VarRef&) const = default;
};

struct Selector {
  enum class Kind : std::uint8_t { none, field, element };
  Kind kind = Kind::none;
  FieldId field{};  // meaningful only for Kind::field

  static Selector none() { return {}; }
  static Selector of_field(FieldId f) { return {Kind::field, f}; }
  static Selector element() { return {Kind::element, {}}; }

  bool operator==(const Selector& o) const {
    return kind == o.kind && (kind != Kind::field || field == o.field);
  }
  std::strong_ordering operator<=>(const Selector& o) const {
    if (auto c = kind <=> o.kind; c != 0) return c;
    if (kind != Kind::field) return std::strong_ordering::equal;
    return field <=> o.field;
  }
};

struct VariableId {
  MethodId method{};
  VarRef var{};
  Selector selector{};
  auto operator<=>(const VariableId&) const = default;
};

struct SourceLoc {
  std::uint32_t file = 0;  // index into Program::source_files
  std::uint32_t line = 0;
  auto operator<=>(const SourceLoc&) const = default;
};

inline constexpr std::uint32_t kNoTarget = 0xffffffffu;

struct Instruction {
  Opcode op = Opcode::ret;
  // Operand as written: constant token, variable/label name, `Class.field`
  // or `Class::method`. Empty when the opcode takes no operand.
  std::string operand;
  // Resolved operands, filled in by the loader.
  VarRef var{};              // ldloc/stloc/ldloca/ldarg/starg/ldarga
  FieldId field{};           // ldfld/stfld/ldflda (declaring class's field)
  MethodId method{};         // call/callvirt/newobj
  std::uint32_t target = kNoTarget;  // branch target (index of the label)
};

struct Param {
  std::string name;
  bool byref = false;
};

struct MethodDef {
  ClassId owner{};
  std::string name;
  std::vector<Param> params;
  std::vector<std::string> locals;
  bool virtual_flag = false;
  bool override_flag = false;
  bool returns_value = false;
  std::vector<Instruction> body;
  std::vector<SourceLoc> line_map;      // one entry per instruction
  std::vector<std::int32_t> stack_depth;  // verified depth before each
                                          // instruction, -1 if unreachable

  bool is_virtual() const { return virtual_flag || override_flag; }
  std::size_t arity() const { return params.size(); }
};

struct FieldDef {
  ClassId owner{};
  std::string name;
};

struct ClassDef {
  std::string name;
  std::optional<ClassId> parent;
  std::vector<FieldId> fields;
  std::vector<MethodId> methods;  // declaration order
};

// Stack effect of one instruction. Depends on the callee for calls.
struct StackEffect {
  int pops = 0;
  int pushes = 0;
};

class Program {
 public:
  std::vector<ClassDef> classes;
  std::vector<MethodDef> methods;
  std::vector<FieldDef> fields;
  std::vector<std::string> source_files;

  const MethodDef& method(MethodId id) const { return methods.at(id.value); }
  const ClassDef& klass(ClassId id) const { return classes.at(id.value); }
  const FieldDef& field(FieldId id) const { return fields.at(id.value); }

  // "Class::method"
  std::string method_name(MethodId id) const;
  // "Class.field"
  std::string field_name(FieldId id) const;
  std::string var_name(MethodId m, VarRef v) const;
  // Variable with selector: `x`, `x.f`, `x[]`.
  std::string describe(const VariableId& v) const;

  std::optional<MethodId> find_method(std::string_view qualified) const;
  std::optional<ClassId> find_class(std::string_view name) const;
  // Looks `name` up on `cls` and then its ancestors.
  std::optional<FieldId> find_field(ClassId cls, std::string_view name) const;
  std::optional<std::uint32_t> find_source_file(std::string_view name) const;

  StackEffect stack_effect(const Instruction& ins) const;

  std::size_t instruction_count() const;
};

// Load failure. `line`/`column` point into the MiniIL text (1-based).
class LoadError : public std::runtime_error {
 public:
  LoadError(std::uint32_t line, std::uint32_t column, const std::string& what);
  std::uint32_t line() const { return line_; }
  std::uint32_t column() const { return column_; }

 private:
  std::uint32_t line_;
  std::uint32_t column_;
};

Program parse_program(std::string_view text);
// Canonical text; parse_program(print_program(p)) is structurally equal to p.
std::string print_program(const Program& program);
bool structurally_equal(const Program& a, const Program& b);

struct UseSite {
  MethodId method{};
  std::uint32_t instr = 0;
  VariableId variable{};
  auto operator<=>(const UseSite&) const = default;
};

class ResolveError : public std::runtime_error {
 public:
  enum class Reason { no_method, not_in_scope, never_read, bad_occurrence };
  ResolveError(Reason reason, const std::string& what)
      : std::runtime_error(what), reason_(reason) {}
  Reason reason() const { return reason_; }

 private:
  Reason reason_;
};

std::string_view reason_code(ResolveError::Reason r);

// Does the instruction read `v`? Covers direct loads, address loads and, for
// selectors, the ldfld/ldelem that consumes the variable's value.
struct ReadMatch {
  std::uint32_t instr = 0;
  VariableId variable{};
};

// All reads of `variable` ("x", "x.f" or "x[]") mapped to (file, line), in
// instruction order. Throws ResolveError.
std::vector<ReadMatch> reads_on_line(const Program& program, std::string_view file,
                                     std::uint32_t line, std::string_view variable);

// The last read on the line, or the `occurrence`-th (0-based) when given.
UseSite resolve_use_site(const Program& program, std::string_view file, std::uint32_t line,
                         std::string_view variable,
                         std::optional<std::uint32_t> occurrence = std::nullopt);

// Names of the locals/params read by instructions mapped to (file, line).
std::vector<std::string> variables_read_on_line(const Program& program, std::uint32_t file,
                                                std::uint32_t line);

}  // namespace duct
