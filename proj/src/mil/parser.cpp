// MiniIL text loader: tokenizing, name resolution and load-time verification.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <map>
#include <set>
#include <string>

#include "duct/mil.hpp"

namespace duct {

namespace {

struct Pos {
  std::uint32_t line = 0;
  std::uint32_t col = 0;
};

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '$'; }
bool ident_char(char c) { return ident_start(c) || std::isdigit(static_cast<unsigned char>(c)); }

bool is_identifier(std::string_view s) {
  if (s.empty() || !ident_start(s[0])) return false;
  return std::all_of(s.begin(), s.end(), ident_char);
}

bool is_number(std::string_view s) {
  if (s.empty()) return false;
  std::size_t i = (s[0] == '-' || s[0] == '+') ? 1 : 0;
  if (i == s.size()) return false;
  bool digit = false;
  bool dot = false;
  bool exp = false;
  for (; i < s.size(); ++i) {
    char c = s[i];
    if (std::isdigit(static_cast<unsigned char>(c))) {
      digit = true;
    } else if (c == '.' && !dot && !exp) {
      dot = true;
    } else if ((c == 'e' || c == 'E') && digit && !exp) {
      exp = true;
      digit = false;
      if (i + 1 < s.size() && (s[i + 1] == '-' || s[i + 1] == '+')) ++i;
    } else {
      return false;
    }
  }
  return digit;
}

// One source line split into tokens, each with its 1-based column.
struct Token {
  std::string text;
  std::uint32_t col = 0;
};

class LineLexer {
 public:
  LineLexer(std::string_view line, std::uint32_t line_no) : line_(line), line_no_(line_no) {}

  std::vector<Token> tokenize() {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < line_.size()) {
      char c = line_[i];
      if (c == ';') break;
      if (std::isspace(static_cast<unsigned char>(c))) {
        ++i;
        continue;
      }
      auto col = static_cast<std::uint32_t>(i + 1);
      if (c == '"') {
        std::size_t j = i + 1;
        while (j < line_.size() && line_[j] != '"') {
          if (line_[j] == '\\' && j + 1 < line_.size()) ++j;
          ++j;
        }
        if (j >= line_.size()) throw LoadError(line_no_, col, "unterminated string constant");
        out.push_back({std::string(line_.substr(i, j - i + 1)), col});
        i = j + 1;
      } else if (c == '(' || c == ')' || c == ',') {
        out.push_back({std::string(1, c), col});
        ++i;
      } else {
        std::size_t j = i;
        while (j < line_.size() && !std::isspace(static_cast<unsigned char>(line_[j])) &&
               line_[j] != '(' && line_[j] != ')' && line_[j] != ',' && line_[j] != ';' &&
               line_[j] != '"') {
          ++j;
        }
        out.push_back({std::string(line_.substr(i, j - i)), col});
        i = j;
      }
    }
    return out;
  }

 private:
  std::string_view line_;
  std::uint32_t line_no_;
};

struct RawInstr {
  Opcode op;
  std::string operand;
  Pos op_pos;
  Pos operand_pos;
};

struct RawMethod {
  std::string name;
  Pos pos;
  std::vector<Param> params;
  std::vector<std::string> locals;
  bool locals_seen = false;
  bool virtual_flag = false;
  bool override_flag = false;
  bool returns_value = false;
  std::vector<RawInstr> body;
  std::vector<SourceLoc> line_map;
  bool saw_line = false;
};

struct RawClass {
  std::string name;
  Pos pos;
  std::string parent;
  Pos parent_pos;
  std::vector<std::pair<std::string, Pos>> fields;
  std::vector<RawMethod> methods;
};

[[noreturn]] void fail(Pos p, const std::string& msg) { throw LoadError(p.line, p.col, msg); }

class Loader {
 public:
  explicit Loader(std::string_view text) : text_(text) {}

  Program load() {
    parse_text();
    build_classes();
    build_methods();
    check_overrides();
    for (std::uint32_t m = 0; m < program_.methods.size(); ++m) {
      resolve_body(MethodId{m});
    }
    for (std::uint32_t m = 0; m < program_.methods.size(); ++m) {
      verify_stack(MethodId{m});
      verify_bindings(MethodId{m});
    }
    return std::move(program_);
  }

 private:
  // ---- pass 1: text to raw structure ----

  void parse_text() {
    std::uint32_t line_no = 0;
    std::size_t start = 0;
    while (start <= text_.size()) {
      std::size_t end = text_.find('\n', start);
      if (end == std::string_view::npos) end = text_.size();
      std::string_view line = text_.substr(start, end - start);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      ++line_no;
      parse_line(LineLexer(line, line_no).tokenize(), line_no);
      if (end == text_.size()) break;
      start = end + 1;
    }
    if (method_) fail(method_->pos, "method '" + method_->name + "' is missing .end");
    if (class_) fail(class_->pos, "class '" + class_->name + "' is missing .end");
  }

  void parse_line(const std::vector<Token>& toks, std::uint32_t line_no) {
    if (toks.empty()) return;
    const Token& head = toks[0];
    Pos hp{line_no, head.col};
    auto at = [&](std::size_t i) -> Pos {
      return i < toks.size() ? Pos{line_no, toks[i].col}
                             : Pos{line_no, toks.back().col +
                                                static_cast<std::uint32_t>(toks.back().text.size())};
    };
    auto expect_ident = [&](std::size_t i, const char* what) -> const std::string& {
      if (i >= toks.size() || !is_identifier(toks[i].text)) {
        fail(at(i), std::string("expected ") + what);
      }
      return toks[i].text;
    };
    auto expect_end = [&](std::size_t i) {
      if (i < toks.size()) fail(at(i), "unexpected token '" + toks[i].text + "'");
    };

    if (head.text == ".class") {
      if (class_) fail(hp, "nested .class (missing .end?)");
      RawClass c;
      c.pos = hp;
      c.name = expect_ident(1, "class name");
      std::size_t i = 2;
      if (i < toks.size() && toks[i].text == ":") {
        c.parent = expect_ident(i + 1, "parent class name");
        c.parent_pos = at(i + 1);
        i += 2;
      }
      expect_end(i);
      classes_.push_back(std::move(c));
      class_ = &classes_.back();
      return;
    }
    if (head.text == ".end") {
      expect_end(1);
      if (method_) {
        if (method_->body.empty()) fail(method_->pos, "method '" + method_->name + "' has an empty body");
        if (!method_->saw_line) {
          fail(method_->pos, "method '" + method_->name + "' has no .line directive");
        }
        method_ = nullptr;
      } else if (class_) {
        class_ = nullptr;
      } else {
        fail(hp, ".end without an open .class or .method");
      }
      return;
    }
    if (head.text == ".field") {
      if (!class_ || method_) fail(hp, ".field outside of a class body");
      class_->fields.emplace_back(expect_ident(1, "field name"), at(1));
      expect_end(2);
      return;
    }
    if (head.text == ".method") {
      if (!class_) fail(hp, ".method outside of a class");
      if (method_) fail(hp, "nested .method (missing .end?)");
      RawMethod m;
      m.pos = hp;
      std::size_t i = 1;
      while (i < toks.size() && (toks[i].text == "virtual" || toks[i].text == "override")) {
        (toks[i].text == "virtual" ? m.virtual_flag : m.override_flag) = true;
        ++i;
      }
      if (m.virtual_flag && m.override_flag) fail(hp, "a method is either virtual or override, not both");
      m.name = expect_ident(i, "method name");
      m.pos = at(i);
      ++i;
      if (i >= toks.size() || toks[i].text != "(") fail(at(i), "expected '('");
      ++i;
      if (i < toks.size() && toks[i].text == ")") {
        ++i;
      } else {
        while (true) {
          Param p;
          if (i < toks.size() && toks[i].text == "ref") {
            p.byref = true;
            ++i;
          }
          p.name = expect_ident(i, "parameter name");
          ++i;
          m.params.push_back(std::move(p));
          if (i < toks.size() && toks[i].text == ",") {
            ++i;
            continue;
          }
          if (i < toks.size() && toks[i].text == ")") {
            ++i;
            break;
          }
          fail(at(i), "expected ',' or ')'");
        }
      }
      if (i < toks.size() && toks[i].text == "returns") {
        m.returns_value = true;
        ++i;
      }
      expect_end(i);
      class_->methods.push_back(std::move(m));
      method_ = &class_->methods.back();
      return;
    }
    if (head.text == ".locals") {
      if (!method_) fail(hp, ".locals outside of a method");
      if (method_->locals_seen) fail(hp, "duplicate .locals directive");
      method_->locals_seen = true;
      std::size_t i = 1;
      while (i < toks.size()) {
        method_->locals.push_back(expect_ident(i, "local name"));
        ++i;
        if (i < toks.size()) {
          if (toks[i].text != ",") fail(at(i), "expected ','");
          ++i;
          if (i == toks.size()) fail(at(i), "expected local name");
        }
      }
      return;
    }
    if (head.text == ".line") {
      if (!method_) fail(hp, ".line outside of a method");
      if (toks.size() != 2) fail(at(toks.size() < 2 ? 1 : 2), "expected .line <file>:<n>");
      const std::string& spec = toks[1].text;
      auto colon = spec.rfind(':');
      std::uint32_t n = 0;
      if (colon == std::string::npos || colon == 0) fail(at(1), "expected .line <file>:<n>");
      auto digits = std::string_view(spec).substr(colon + 1);
      auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), n);
      if (ec != std::errc{} || ptr != digits.data() + digits.size() || n == 0) {
        fail(at(1), "invalid line number in .line directive");
      }
      current_line_ = SourceLoc{intern_file(spec.substr(0, colon)), n};
      method_->saw_line = true;
      return;
    }
    if (!head.text.empty() && head.text[0] == '.') fail(hp, "unknown directive '" + head.text + "'");

    auto op = opcode_from_name(head.text);
    if (!op) fail(hp, "unknown opcode '" + head.text + "'");
    if (!method_) fail(hp, "instruction outside of a method");
    if (!method_->saw_line) fail(hp, "instruction is not covered by a .line directive");
    RawInstr ins{*op, {}, hp, {}};
    bool wants_operand = operand_kind(*op) != OperandKind::none;
    if (wants_operand) {
      if (toks.size() < 2) fail(at(1), "opcode '" + head.text + "' requires an operand");
      ins.operand = toks[1].text;
      ins.operand_pos = at(1);
      expect_end(2);
    } else {
      expect_end(1);
    }
    method_->body.push_back(std::move(ins));
    method_->line_map.push_back(current_line_);
  }

  enum class OperandKind { none, constant, local, param, field, method, label };

  static OperandKind operand_kind(Opcode op) {
    switch (op) {
      case Opcode::ldc:
        return OperandKind::constant;
      case Opcode::ldloc:
      case Opcode::stloc:
      case Opcode::ldloca:
        return OperandKind::local;
      case Opcode::ldarg:
      case Opcode::starg:
      case Opcode::ldarga:
        return OperandKind::param;
      case Opcode::ldfld:
      case Opcode::stfld:
      case Opcode::ldflda:
        return OperandKind::field;
      case Opcode::call:
      case Opcode::callvirt:
      case Opcode::newobj:
        return OperandKind::method;
      case Opcode::br:
      case Opcode::brtrue:
      case Opcode::brfalse:
      case Opcode::label:
        return OperandKind::label;
      default:
        return OperandKind::none;
    }
  }

  std::uint32_t intern_file(const std::string& name) {
    if (auto idx = program_.find_source_file(name)) return *idx;
    program_.source_files.push_back(name);
    return static_cast<std::uint32_t>(program_.source_files.size() - 1);
  }

  // ---- pass 2: classes, fields, method shells ----

  void build_classes() {
    std::map<std::string, std::uint32_t> by_name;
    for (std::uint32_t i = 0; i < classes_.size(); ++i) {
      if (!by_name.emplace(classes_[i].name, i).second) {
        fail(classes_[i].pos, "duplicate class '" + classes_[i].name + "'");
      }
      ClassDef c;
      c.name = classes_[i].name;
      program_.classes.push_back(std::move(c));
    }
    for (std::uint32_t i = 0; i < classes_.size(); ++i) {
      const auto& rc = classes_[i];
      if (rc.parent.empty()) continue;
      auto it = by_name.find(rc.parent);
      if (it == by_name.end()) fail(rc.parent_pos, "undefined class '" + rc.parent + "'");
      program_.classes[i].parent = ClassId{it->second};
    }
    for (std::uint32_t i = 0; i < classes_.size(); ++i) {
      std::set<std::uint32_t> seen;
      std::optional<ClassId> cur = ClassId{i};
      while (cur) {
        if (!seen.insert(cur->value).second) {
          fail(classes_[i].pos, "cyclic class hierarchy through '" + classes_[i].name + "'");
        }
        cur = program_.classes[cur->value].parent;
      }
    }
    for (std::uint32_t i = 0; i < classes_.size(); ++i) {
      std::set<std::string> names;
      for (const auto& [name, pos] : classes_[i].fields) {
        if (!names.insert(name).second) fail(pos, "duplicate field '" + name + "'");
        program_.fields.push_back(FieldDef{ClassId{i}, name});
        program_.classes[i].fields.push_back(
            FieldId{static_cast<std::uint32_t>(program_.fields.size() - 1)});
      }
    }
  }

  void build_methods() {
    for (std::uint32_t c = 0; c < classes_.size(); ++c) {
      std::set<std::string> names;
      for (auto& rm : classes_[c].methods) {
        if (!names.insert(rm.name).second) {
          fail(rm.pos, "duplicate method '" + rm.name + "' in class '" + classes_[c].name + "'");
        }
        std::set<std::string> slots;
        for (const auto& p : rm.params) {
          if (!slots.insert(p.name).second) fail(rm.pos, "duplicate parameter '" + p.name + "'");
        }
        for (const auto& l : rm.locals) {
          if (!slots.insert(l).second) {
            fail(rm.pos, "local '" + l + "' clashes with another local or parameter");
          }
        }
        MethodDef m;
        m.owner = ClassId{c};
        m.name = rm.name;
        m.params = rm.params;
        m.locals = rm.locals;
        m.virtual_flag = rm.virtual_flag;
        m.override_flag = rm.override_flag;
        m.returns_value = rm.returns_value;
        m.line_map = rm.line_map;
        program_.methods.push_back(std::move(m));
        auto id = MethodId{static_cast<std::uint32_t>(program_.methods.size() - 1)};
        program_.classes[c].methods.push_back(id);
        raw_methods_.push_back(&rm);
      }
    }
  }

  bool same_signature(const MethodDef& a, const MethodDef& b) const {
    if (a.params.size() != b.params.size() || a.returns_value != b.returns_value) return false;
    for (std::size_t i = 0; i < a.params.size(); ++i) {
      if (a.params[i].byref != b.params[i].byref) return false;
    }
    return true;
  }

  void check_overrides() {
    for (std::uint32_t i = 0; i < program_.methods.size(); ++i) {
      const auto& m = program_.methods[i];
      if (!m.override_flag) continue;
      bool found = false;
      std::optional<ClassId> cur = program_.klass(m.owner).parent;
      while (cur && !found) {
        for (MethodId id : program_.klass(*cur).methods) {
          const auto& base = program_.method(id);
          if (base.name == m.name && base.is_virtual()) {
            if (!same_signature(base, m)) {
              fail(raw_methods_[i]->pos, "override '" + m.name +
                                             "' does not match the signature of " +
                                             program_.method_name(id));
            }
            found = true;
            break;
          }
        }
        cur = program_.klass(*cur).parent;
      }
      if (!found) {
        fail(raw_methods_[i]->pos,
             "override '" + m.name + "' has no matching virtual method in an ancestor class");
      }
    }
  }

  // ---- pass 3: operand resolution ----

  void resolve_body(MethodId id) {
    auto& m = program_.methods[id.value];
    const RawMethod& rm = *raw_methods_[id.value];
    std::map<std::string, std::uint32_t> labels;
    for (std::uint32_t k = 0; k < rm.body.size(); ++k) {
      const auto& ri = rm.body[k];
      if (ri.op != Opcode::label) continue;
      if (!is_identifier(ri.operand)) fail(ri.operand_pos, "invalid label name '" + ri.operand + "'");
      if (!labels.emplace(ri.operand, k).second) {
        fail(ri.operand_pos, "duplicate label '" + ri.operand + "'");
      }
    }
    m.body.reserve(rm.body.size());
    for (const auto& ri : rm.body) {
      Instruction ins;
      ins.op = ri.op;
      ins.operand = ri.operand;
      switch (operand_kind(ri.op)) {
        case OperandKind::none:
          break;
        case OperandKind::constant:
          if (!is_number(ri.operand) && ri.operand != "null" && ri.operand != "true" &&
              ri.operand != "false" && !(ri.operand.size() >= 2 && ri.operand.front() == '"')) {
            fail(ri.operand_pos, "invalid constant '" + ri.operand + "'");
          }
          break;
        case OperandKind::local: {
          auto it = std::find(m.locals.begin(), m.locals.end(), ri.operand);
          if (it == m.locals.end()) fail(ri.operand_pos, "undefined local '" + ri.operand + "'");
          ins.var = VarRef{VarKind::local, static_cast<std::uint32_t>(it - m.locals.begin())};
          break;
        }
        case OperandKind::param: {
          auto it = std::find_if(m.params.begin(), m.params.end(),
                                 [&](const Param& p) { return p.name == ri.operand; });
          if (it == m.params.end()) fail(ri.operand_pos, "undefined parameter '" + ri.operand + "'");
          ins.var = VarRef{VarKind::arg, static_cast<std::uint32_t>(it - m.params.begin())};
          break;
        }
        case OperandKind::field: {
          auto dot = ri.operand.rfind('.');
          if (dot == std::string::npos) fail(ri.operand_pos, "expected field reference Class.field");
          auto cls = program_.find_class(ri.operand.substr(0, dot));
          if (!cls) fail(ri.operand_pos, "undefined class '" + ri.operand.substr(0, dot) + "'");
          auto f = program_.find_field(*cls, ri.operand.substr(dot + 1));
          if (!f) fail(ri.operand_pos, "undefined field '" + ri.operand + "'");
          ins.field = *f;
          break;
        }
        case OperandKind::method: {
          auto sep = ri.operand.find("::");
          if (sep == std::string::npos) fail(ri.operand_pos, "expected method reference Class::method");
          if (!program_.find_class(ri.operand.substr(0, sep))) {
            fail(ri.operand_pos, "undefined class '" + ri.operand.substr(0, sep) + "'");
          }
          auto target = program_.find_method(ri.operand);
          if (!target) fail(ri.operand_pos, "undefined method '" + ri.operand + "'");
          if (ri.op == Opcode::callvirt && !program_.method(*target).is_virtual()) {
            fail(ri.operand_pos, "callvirt target '" + ri.operand + "' is not virtual");
          }
          ins.method = *target;
          break;
        }
        case OperandKind::label:
          if (ri.op != Opcode::label) {
            auto it = labels.find(ri.operand);
            if (it == labels.end()) fail(ri.operand_pos, "undefined label '" + ri.operand + "'");
            ins.target = it->second;
          }
          break;
      }
      m.body.push_back(std::move(ins));
    }
  }

  // ---- pass 4: verification ----

  void verify_stack(MethodId id) {
    auto& m = program_.methods[id.value];
    const RawMethod& rm = *raw_methods_[id.value];
    const auto n = static_cast<std::uint32_t>(m.body.size());
    m.stack_depth.assign(n, -1);
    std::vector<std::uint32_t> work{0};
    m.stack_depth[0] = 0;
    auto flow = [&](std::uint32_t from, std::uint32_t to, int depth) {
      if (to >= n) fail(rm.body[from].op_pos, "control falls off the end of method '" + m.name + "'");
      if (m.stack_depth[to] < 0) {
        m.stack_depth[to] = depth;
        work.push_back(to);
      } else if (m.stack_depth[to] != depth) {
        fail(rm.body[to].op_pos, "stack depth mismatch: entered with " +
                                     std::to_string(m.stack_depth[to]) + " and " +
                                     std::to_string(depth));
      }
    };
    while (!work.empty()) {
      std::uint32_t k = work.back();
      work.pop_back();
      const auto& ins = m.body[k];
      int depth = m.stack_depth[k];
      auto eff = program_.stack_effect(ins);
      if (depth < eff.pops) {
        fail(rm.body[k].op_pos, "stack underflow: '" + std::string(opcode_name(ins.op)) +
                                    "' needs " + std::to_string(eff.pops) + " operand(s), " +
                                    std::to_string(depth) + " available");
      }
      int after = depth - eff.pops + eff.pushes;
      if (ins.op == Opcode::ret) {
        int expected = m.returns_value ? 1 : 0;
        if (depth != expected) {
          fail(rm.body[k].op_pos, "ret with stack depth " + std::to_string(depth) + ", expected " +
                                      std::to_string(expected));
        }
        continue;
      }
      if (is_branch(ins.op)) flow(k, ins.target, after);
      if (!ends_control(ins.op)) flow(k, k + 1, after);
    }
  }

  static bool is_address_producer(Opcode op) {
    return op == Opcode::ldloca || op == Opcode::ldarga || op == Opcode::ldflda ||
           op == Opcode::ldelema;
  }

  // Byref formals must be bound to an address produced in the same block;
  // by-value formals must not receive a block-local address.
  void verify_bindings(MethodId id) {
    const auto& m = program_.methods[id.value];
    const RawMethod& rm = *raw_methods_[id.value];
    std::vector<std::optional<Opcode>> stack;
    bool leader = true;
    for (std::uint32_t k = 0; k < m.body.size(); ++k) {
      const auto& ins = m.body[k];
      if (m.stack_depth[k] < 0) {
        leader = true;
        continue;
      }
      if (leader || ins.op == Opcode::label) {
        stack.assign(static_cast<std::size_t>(m.stack_depth[k]), std::nullopt);
      }
      leader = false;
      if (is_call(ins.op)) {
        const auto& callee = program_.method(ins.method);
        std::size_t base = stack.size() - callee.arity();
        for (std::size_t i = 0; i < callee.arity(); ++i) {
          auto producer = stack[base + i];
          bool addr = producer && is_address_producer(*producer);
          if (callee.params[i].byref && !addr) {
            fail(rm.body[k].operand_pos,
                 "byref parameter '" + callee.params[i].name + "' of " +
                     program_.method_name(ins.method) +
                     " must be bound to an address produced in the same block "
                     "(ldloca/ldarga/ldflda/ldelema)");
          }
          if (!callee.params[i].byref && addr) {
            fail(rm.body[k].operand_pos, "address bound to by-value parameter '" +
                                             callee.params[i].name + "' of " +
                                             program_.method_name(ins.method));
          }
        }
      }
      auto eff = program_.stack_effect(ins);
      if (ins.op == Opcode::dup) {
        stack.push_back(stack.back());
      } else {
        stack.resize(stack.size() - static_cast<std::size_t>(eff.pops));
        for (int p = 0; p < eff.pushes; ++p) stack.emplace_back(ins.op);
      }
      if (is_branch(ins.op) || ins.op == Opcode::ret) leader = true;
    }
  }

  std::string_view text_;
  Program program_;
  std::vector<RawClass> classes_;
  std::vector<const RawMethod*> raw_methods_;
  RawClass* class_ = nullptr;
  RawMethod* method_ = nullptr;
  SourceLoc current_line_{};
};

}  // namespace

Program parse_program(std::string_view text) { return Loader(text).load(); }

}  // namespace duct
