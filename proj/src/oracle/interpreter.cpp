// Small-step interpreter for executable MiniIL. Byref parameters hold the
// location they were bound to and every access goes through it.

#include <map>

#include "duct/oracle.hpp"
#include "internal.hpp"

namespace duct::oracle {

namespace {

struct Loc {
  enum class Kind : std::uint8_t { slot, field, elem };
  Kind kind = Kind::slot;
  std::uint32_t frame = 0;
  VarRef var{};
  std::uint32_t obj = 0;
  std::uint32_t field = 0;
  std::int64_t idx = 0;

  bool operator==(const Loc& o) const {
    if (kind != o.kind) return false;
    switch (kind) {
      case Kind::slot:
        return frame == o.frame && var == o.var;
      case Kind::field:
        return obj == o.obj && field == o.field;
      case Kind::elem:
        return obj == o.obj && idx == o.idx;
    }
    return false;
  }
};

struct Value {
  enum class Kind : std::uint8_t { null, int_, ref, addr };
  Kind kind = Kind::null;
  std::int64_t i = 0;
  std::uint32_t obj = 0;
  Loc loc{};

  static Value of_int(std::int64_t v) { return {Kind::int_, v, 0, {}}; }
  static Value of_ref(std::uint32_t o) { return {Kind::ref, 0, o, {}}; }
  static Value of_addr(const Loc& l) { return {Kind::addr, 0, 0, l}; }
};

struct Object {
  std::map<std::uint32_t, Value> fields;
  std::map<std::int64_t, Value> elems;
};

struct FrameMem {
  MethodId method{};
  std::vector<Value> args;
  std::vector<Value> locals;
};

class Machine {
 public:
  Machine(const Program& p, std::size_t max_steps)
      : p_(p), max_steps_(max_steps), facts_(detail::scan_program(p)) {}

  Trace run(MethodId entry, const std::vector<std::int64_t>& inputs) {
    const auto& m = p_.method(entry);
    std::vector<Value> args;
    for (std::size_t i = 0; i < m.params.size(); ++i) {
      Value v = Value::of_int(i < inputs.size() ? inputs[i] : 0);
      if (m.params[i].byref) {
        // A cell in a throwaway frame of its own.
        frames_.push_back({entry, {v}, {}});
        Loc l;
        l.frame = static_cast<std::uint32_t>(frames_.size() - 1);
        l.var = VarRef{VarKind::arg, 0};
        v = Value::of_addr(l);
      }
      args.push_back(v);
    }
    exec(entry, std::move(args));
    trace_.steps = steps_;
    return std::move(trace_);
  }

 private:
  [[noreturn]] void stuck(MethodId m, std::uint32_t k, const std::string& why) const {
    throw InterpreterError(p_.method_name(m) + " instr " + std::to_string(k) + ": " + why);
  }

  Loc loc_of(std::uint32_t frame, VarRef v) const {
    const auto& f = frames_[frame];
    if (v.kind == VarKind::arg && p_.method(f.method).params[v.slot].byref) {
      return f.args[v.slot].loc;
    }
    Loc l;
    l.frame = frame;
    l.var = v;
    return l;
  }

  Value& cell(const Loc& l) {
    switch (l.kind) {
      case Loc::Kind::slot: {
        auto& f = frames_[l.frame];
        return l.var.kind == VarKind::arg ? f.args[l.var.slot] : f.locals[l.var.slot];
      }
      case Loc::Kind::field:
        return heap_[l.obj].fields.try_emplace(l.field, Value::of_int(0)).first->second;
      case Loc::Kind::elem:
        return heap_[l.obj].elems.try_emplace(l.idx, Value::of_int(0)).first->second;
    }
    throw InterpreterError("bad location");
  }

  void record(std::uint32_t frame, std::uint32_t k, const Loc& written) {
    const auto& f = frames_[frame];
    const auto& m = p_.method(f.method);
    ObservedStore s;
    s.method = f.method;
    s.instr = k;
    auto consider = [&](VarRef u) {
      Loc l = loc_of(frame, u);
      if (l == written) {
        s.candidates.push_back({ObservedStore::Target::Kind::direct, u, {}});
      }
      if (written.kind == Loc::Kind::slot) return;
      const Value& v = cell(l);
      if (v.kind != Value::Kind::ref || v.obj != written.obj) return;
      if (written.kind == Loc::Kind::field) {
        s.candidates.push_back({ObservedStore::Target::Kind::field, u, FieldId{written.field}});
      } else {
        s.candidates.push_back({ObservedStore::Target::Kind::element, u, {}});
      }
    };
    for (std::uint32_t i = 0; i < m.params.size(); ++i) consider({VarKind::arg, i});
    for (std::uint32_t i = 0; i < m.locals.size(); ++i) consider({VarKind::local, i});
    trace_.stores.push_back(std::move(s));
  }

  std::int64_t as_int(MethodId m, std::uint32_t k, const Value& v) const {
    if (v.kind == Value::Kind::int_) return v.i;
    if (v.kind == Value::Kind::null) return 0;
    if (v.kind == Value::Kind::ref) return 1;
    stuck(m, k, "address used as an integer");
  }

  std::uint32_t as_obj(MethodId m, std::uint32_t k, const Value& v) const {
    if (v.kind != Value::Kind::ref) stuck(m, k, "expected an object reference");
    return v.obj;
  }

  Value constant(MethodId m, std::uint32_t k, const std::string& text) const {
    if (text == "null") return {};
    if (text == "true") return Value::of_int(1);
    if (text == "false") return Value::of_int(0);
    if (!text.empty() && text.front() == '"') stuck(m, k, "string constants are not interpreted");
    try {
      return Value::of_int(static_cast<std::int64_t>(std::stod(text)));
    } catch (const std::exception&) {
      stuck(m, k, "bad constant " + text);
    }
  }

  std::optional<Value> exec(MethodId mid, std::vector<Value> args) {
    const auto& m = p_.method(mid);
    frames_.push_back({mid, std::move(args), std::vector<Value>(m.locals.size())});
    const auto frame = static_cast<std::uint32_t>(frames_.size() - 1);
    std::vector<Value> st;
    auto pop = [&](std::uint32_t k) {
      if (st.empty()) stuck(mid, k, "stack underflow");
      Value v = st.back();
      st.pop_back();
      return v;
    };
    std::uint32_t pc = 0;
    while (true) {
      if (pc >= m.body.size()) stuck(mid, pc, "fell off the end");
      if (++steps_ > max_steps_) {
        throw InterpreterError("step budget of " + std::to_string(max_steps_) + " exceeded");
      }
      const std::uint32_t k = pc++;
      const auto& ins = m.body[k];
      switch (ins.op) {
        case Opcode::ldc:
          st.push_back(constant(mid, k, ins.operand));
          break;
        case Opcode::ldloc:
        case Opcode::ldarg:
          st.push_back(cell(loc_of(frame, ins.var)));
          break;
        case Opcode::stloc:
        case Opcode::starg: {
          Value v = pop(k);
          Loc l = loc_of(frame, ins.var);
          record(frame, k, l);
          cell(l) = v;
          break;
        }
        case Opcode::ldloca:
        case Opcode::ldarga:
          st.push_back(Value::of_addr(loc_of(frame, ins.var)));
          break;
        case Opcode::ldfld: {
          auto o = as_obj(mid, k, pop(k));
          Loc l{Loc::Kind::field, 0, {}, o, ins.field.value, 0};
          st.push_back(cell(l));
          break;
        }
        case Opcode::ldflda: {
          auto o = as_obj(mid, k, pop(k));
          st.push_back(Value::of_addr({Loc::Kind::field, 0, {}, o, ins.field.value, 0}));
          break;
        }
        case Opcode::stfld: {
          Value v = pop(k);
          auto o = as_obj(mid, k, pop(k));
          Loc l{Loc::Kind::field, 0, {}, o, ins.field.value, 0};
          record(frame, k, l);
          cell(l) = v;
          break;
        }
        case Opcode::ldelem:
        case Opcode::ldelema: {
          auto i = as_int(mid, k, pop(k));
          auto o = as_obj(mid, k, pop(k));
          Loc l{Loc::Kind::elem, 0, {}, o, 0, i};
          st.push_back(ins.op == Opcode::ldelem ? cell(l) : Value::of_addr(l));
          break;
        }
        case Opcode::stelem: {
          Value v = pop(k);
          auto i = as_int(mid, k, pop(k));
          auto o = as_obj(mid, k, pop(k));
          Loc l{Loc::Kind::elem, 0, {}, o, 0, i};
          record(frame, k, l);
          cell(l) = v;
          break;
        }
        case Opcode::ldind: {
          Value a = pop(k);
          if (a.kind != Value::Kind::addr) stuck(mid, k, "ldind without an address");
          st.push_back(cell(a.loc));
          break;
        }
        case Opcode::stind: {
          Value v = pop(k);
          Value a = pop(k);
          if (a.kind != Value::Kind::addr) stuck(mid, k, "stind without an address");
          record(frame, k, a.loc);
          cell(a.loc) = v;
          break;
        }
        case Opcode::call:
        case Opcode::callvirt:
        case Opcode::newobj: {
          MethodId target = ins.method;
          if (ins.op == Opcode::callvirt) {
            const auto& fam = facts_.family[ins.method.value];
            target = fam[steps_ % fam.size()];
          }
          const auto& callee = p_.method(target);
          std::vector<Value> in(callee.params.size());
          for (std::size_t i = callee.params.size(); i-- > 0;) {
            in[i] = pop(k);
            if (callee.params[i].byref != (in[i].kind == Value::Kind::addr)) {
              stuck(mid, k, "argument does not match parameter " + callee.params[i].name);
            }
          }
          std::optional<Value> obj;
          if (ins.op == Opcode::newobj) {
            heap_.emplace_back();
            obj = Value::of_ref(static_cast<std::uint32_t>(heap_.size() - 1));
          }
          auto r = exec(target, std::move(in));
          if (obj) {
            st.push_back(*obj);
          } else if (r) {
            st.push_back(*r);
          }
          break;
        }
        case Opcode::ret:
          if (m.returns_value) return pop(k);
          return std::nullopt;
        case Opcode::br:
          pc = ins.target;
          break;
        case Opcode::brtrue:
        case Opcode::brfalse: {
          bool truth = as_int(mid, k, pop(k)) != 0;
          if (truth == (ins.op == Opcode::brtrue)) pc = ins.target;
          break;
        }
        case Opcode::label:
          break;
        case Opcode::pop:
          pop(k);
          break;
        case Opcode::dup: {
          Value v = pop(k);
          st.push_back(v);
          st.push_back(v);
          break;
        }
        case Opcode::binop: {
          auto b = as_int(mid, k, pop(k));
          auto a = as_int(mid, k, pop(k));
          st.push_back(Value::of_int(a + b));
          break;
        }
      }
    }
  }

  const Program& p_;
  std::size_t max_steps_;
  detail::Facts facts_;
  std::vector<FrameMem> frames_;
  std::vector<Object> heap_;
  std::size_t steps_ = 0;
  Trace trace_;
};

}  // namespace

Trace interpret(const Program& program, MethodId entry, const std::vector<std::int64_t>& inputs,
                std::size_t max_steps) {
  return Machine(program, max_steps).run(entry, inputs);
}

}  // namespace duct::oracle
