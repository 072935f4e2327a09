#include "duct/abstract_stack.hpp"

#include <stdexcept>

namespace duct {

namespace {

using Tag = AbstractValue::Tag;

bool depends_on_value(const AbstractValue& v) {
  return v.tag == Tag::value_of ||
         ((v.tag == Tag::field_addr || v.tag == Tag::elem_addr) && v.has_base);
}

bool is_byref_param(const MethodDef& m, VarRef v) {
  return v.kind == VarKind::arg && m.params.at(v.slot).byref;
}

// Values read from `var` are stale once `var` is written. Byref parameters
// may alias each other, so a write through one invalidates all of them.
void invalidate(StackState& stack, const MethodDef& m, VarRef var) {
  bool aliasing = is_byref_param(m, var);
  for (auto& e : stack) {
    if (!depends_on_value(e)) continue;
    if (e.var == var || (aliasing && is_byref_param(m, e.var))) e = AbstractValue::unknown(e.origin);
  }
}

// A byref parameter may be bound to a field or element, so heap writes can
// change what it reads.
void invalidate_byref_params(StackState& stack, const MethodDef& m) {
  for (auto& e : stack) {
    if (depends_on_value(e) && is_byref_param(m, e.var)) e = AbstractValue::unknown(e.origin);
  }
}

void invalidate_all(StackState& stack) {
  for (auto& e : stack) {
    if (depends_on_value(e)) e = AbstractValue::unknown(e.origin);
  }
}

AbstractValue pop(StackState& s) {
  AbstractValue v = s.back();
  s.pop_back();
  return v;
}

void drop(StackState& s, std::size_t n) { s.resize(s.size() - n); }

}  // namespace

StoreTarget classify_store(const Instruction& ins, const StackState& before) {
  StoreTarget t;
  const std::size_t d = before.size();
  switch (ins.op) {
    case Opcode::stloc:
    case Opcode::starg:
      t.kind = StoreTarget::Kind::direct;
      t.var = ins.var;
      return t;
    case Opcode::stfld: {
      const auto& base = before[d - 2];
      if (base.tag == Tag::value_of) {
        t.kind = StoreTarget::Kind::field;
        t.var = base.var;
        t.field = ins.field;
      }
      return t;
    }
    case Opcode::stelem: {
      const auto& base = before[d - 3];
      if (base.tag == Tag::value_of) {
        t.kind = StoreTarget::Kind::element;
        t.var = base.var;
      }
      return t;
    }
    case Opcode::stind: {
      const auto& addr = before[d - 2];
      if (addr.tag == Tag::address_of) {
        t.kind = StoreTarget::Kind::direct;
        t.var = addr.var;
      } else if (addr.tag == Tag::field_addr && addr.has_base) {
        t.kind = StoreTarget::Kind::field;
        t.var = addr.var;
        t.field = addr.field;
      } else if (addr.tag == Tag::elem_addr && addr.has_base) {
        t.kind = StoreTarget::Kind::element;
        t.var = addr.var;
      }
      return t;
    }
    default:
      throw std::invalid_argument(std::string("not a store opcode: ") +
                                  std::string(opcode_name(ins.op)));
  }
}

BlockSimulation simulate_block(const Program& program, MethodId method, const BasicBlock& block,
                               const StackState& entry_stack) {
  const auto& m = program.method(method);
  BlockSimulation sim;
  sim.before.reserve(block.end - block.start);
  StackState s = entry_stack;
  for (std::uint32_t k = block.start; k < block.end; ++k) {
    const auto& ins = m.body[k];
    sim.before.push_back(s);
    const auto origin = static_cast<std::int32_t>(k);
    switch (ins.op) {
      case Opcode::ldc:
        s.push_back({Tag::constant, {}, false, {}, origin});
        break;
      case Opcode::ldloc:
      case Opcode::ldarg:
        s.push_back({Tag::value_of, ins.var, false, {}, origin});
        break;
      case Opcode::ldloca:
      case Opcode::ldarga:
        s.push_back({Tag::address_of, ins.var, false, {}, origin});
        break;
      case Opcode::ldfld:
      case Opcode::ldind:
        pop(s);
        s.push_back(AbstractValue::unknown(origin));
        break;
      case Opcode::ldflda: {
        auto base = pop(s);
        AbstractValue v{Tag::field_addr, {}, false, ins.field, origin};
        if (base.tag == Tag::value_of) {
          v.var = base.var;
          v.has_base = true;
        }
        s.push_back(v);
        break;
      }
      case Opcode::ldelem:
      case Opcode::binop:
        drop(s, 2);
        s.push_back(AbstractValue::unknown(origin));
        break;
      case Opcode::ldelema: {
        pop(s);  // index
        auto base = pop(s);
        AbstractValue v{Tag::elem_addr, {}, false, {}, origin};
        if (base.tag == Tag::value_of) {
          v.var = base.var;
          v.has_base = true;
        }
        s.push_back(v);
        break;
      }
      case Opcode::stloc:
      case Opcode::starg:
        pop(s);
        invalidate(s, m, ins.var);
        break;
      case Opcode::stfld:
        drop(s, 2);
        invalidate_byref_params(s, m);
        break;
      case Opcode::stelem:
        drop(s, 3);
        invalidate_byref_params(s, m);
        break;
      case Opcode::stind: {
        pop(s);  // value
        auto addr = pop(s);
        if (addr.tag == Tag::address_of) {
          invalidate(s, m, addr.var);
        } else if (addr.tag == Tag::field_addr || addr.tag == Tag::elem_addr) {
          invalidate_byref_params(s, m);
        } else {
          invalidate_all(s);
        }
        break;
      }
      case Opcode::call:
      case Opcode::callvirt:
      case Opcode::newobj: {
        auto eff = program.stack_effect(ins);
        drop(s, static_cast<std::size_t>(eff.pops));
        invalidate_all(s);
        if (eff.pushes > 0) s.push_back({Tag::call_result, {}, false, {}, origin});
        break;
      }
      case Opcode::ret:
        if (m.returns_value) pop(s);
        break;
      case Opcode::brtrue:
      case Opcode::brfalse:
      case Opcode::pop:
        pop(s);
        break;
      case Opcode::dup:
        s.push_back(s.back());
        break;
      case Opcode::br:
      case Opcode::label:
        break;
    }
  }
  sim.exit = std::move(s);
  return sim;
}

StackState block_entry_stack(const Program& program, MethodId method, const BasicBlock& block) {
  auto depth = program.method(method).stack_depth.at(block.start);
  return StackState(static_cast<std::size_t>(depth < 0 ? 0 : depth), AbstractValue::unknown());
}

StoreTarget resolve_store_target(const Program& program, const Cfg& cfg, std::uint32_t instr) {
  const auto& m = program.method(cfg.method);
  const auto& ins = m.body.at(instr);
  if (!is_store(ins.op)) {
    throw std::invalid_argument(std::string("not a store opcode: ") +
                                std::string(opcode_name(ins.op)));
  }
  if (ins.op == Opcode::stloc || ins.op == Opcode::starg) {
    return StoreTarget{StoreTarget::Kind::direct, ins.var, {}};
  }
  const auto& block = cfg.block(cfg.block_containing(instr));
  auto sim = simulate_block(program, cfg.method, block, block_entry_stack(program, cfg.method, block));
  return classify_store(ins, sim.before[instr - block.start]);
}

MethodStacks simulate_method(const Program& program, const Cfg& cfg) {
  const auto& m = program.method(cfg.method);
  MethodStacks out;
  out.before.resize(m.body.size());
  out.store_targets.resize(m.body.size());
  for (const auto& b : cfg.blocks) {
    auto sim = simulate_block(program, cfg.method, b, block_entry_stack(program, cfg.method, b));
    for (std::uint32_t k = b.start; k < b.end; ++k) {
      auto& state = sim.before[k - b.start];
      if (is_store(m.body[k].op)) out.store_targets[k] = classify_store(m.body[k], state);
      out.before[k] = std::move(state);
    }
  }
  return out;
}

std::string describe(const Program& program, MethodId method, const AbstractValue& v) {
  auto name = [&] { return program.var_name(method, v.var); };
  switch (v.tag) {
    case Tag::constant:
      return "const";
    case Tag::value_of:
      return "value_of(" + name() + ")";
    case Tag::address_of:
      return "address_of(" + name() + ")";
    case Tag::field_addr:
      return "field_addr(" + (v.has_base ? name() : std::string("?")) + ", " +
             program.field_name(v.field) + ")";
    case Tag::elem_addr:
      return "elem_addr(" + (v.has_base ? name() : std::string("?")) + ")";
    case Tag::call_result:
      return "call_result";
    case Tag::unknown:
      return "unknown";
  }
  return "?";
}

std::string describe(const Program& program, MethodId method, const StoreTarget& t) {
  switch (t.kind) {
    case StoreTarget::Kind::direct:
      return "direct(" + program.var_name(method, t.var) + ")";
    case StoreTarget::Kind::field:
      return "field(" + program.var_name(method, t.var) + ", " + program.field_name(t.field) + ")";
    case StoreTarget::Kind::element:
      return "element(" + program.var_name(method, t.var) + ")";
    case StoreTarget::Kind::unknown:
      return "unknown";
  }
  return "?";
}

}  // namespace duct
