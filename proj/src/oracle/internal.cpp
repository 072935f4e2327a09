#include "internal.hpp"

#include <algorithm>

namespace duct::oracle::detail {

namespace {

bool byref_arg(const MethodDef& m, VarRef v) {
  return v.kind == VarKind::arg && m.params[v.slot].byref;
}

// Writing at instruction i clobbers values previously read from `v`.
bool clobbers(const Program& p, const Facts& f, MethodId mid, std::uint32_t i, VarRef v) {
  const auto& m = p.method(mid);
  const auto& ins = m.body[i];
  auto same_cell = [&](VarRef u) { return u == v || (byref_arg(m, u) && byref_arg(m, v)); };
  switch (ins.op) {
    case Opcode::stloc:
    case Opcode::starg:
      return same_cell(ins.var);
    case Opcode::stfld:
    case Opcode::stelem:
      return byref_arg(m, v);
    case Opcode::stind: {
      Val a = value_before(p, f, mid, i, 1);
      if (a.kind == Val::Kind::address_of) return same_cell(a.var);
      if (a.kind == Val::Kind::field_addr || a.kind == Val::Kind::elem_addr) return byref_arg(m, v);
      return true;
    }
    case Opcode::call:
    case Opcode::callvirt:
    case Opcode::newobj:
      return true;
    default:
      return false;
  }
}

bool reads_variable(const Val& v) {
  return v.kind == Val::Kind::value_of ||
         ((v.kind == Val::Kind::field_addr || v.kind == Val::Kind::elem_addr) && v.has_base);
}

// `v` was pushed at `from` and is consumed at `to`.
Val survive(const Program& p, const Facts& f, MethodId m, Val v, std::uint32_t from,
            std::uint32_t to) {
  if (!reads_variable(v)) return v;
  for (std::uint32_t i = from + 1; i < to; ++i) {
    if (clobbers(p, f, m, i, v.var)) {
      Val u;
      u.origin = v.origin;
      return u;
    }
  }
  return v;
}

Val produced_by(const Program& p, const Facts& f, MethodId mid, std::uint32_t j) {
  const auto& ins = p.method(mid).body[j];
  Val v;
  v.origin = static_cast<std::int32_t>(j);
  switch (ins.op) {
    case Opcode::ldc:
      v.kind = Val::Kind::constant;
      return v;
    case Opcode::ldloc:
    case Opcode::ldarg:
      v.kind = Val::Kind::value_of;
      v.var = ins.var;
      return v;
    case Opcode::ldloca:
    case Opcode::ldarga:
      v.kind = Val::Kind::address_of;
      v.var = ins.var;
      return v;
    case Opcode::ldflda:
    case Opcode::ldelema: {
      Val base = value_before(p, f, mid, j, ins.op == Opcode::ldflda ? 0 : 1);
      v.kind = ins.op == Opcode::ldflda ? Val::Kind::field_addr : Val::Kind::elem_addr;
      if (ins.op == Opcode::ldflda) v.field = ins.field;
      if (base.kind == Val::Kind::value_of) {
        v.has_base = true;
        v.var = base.var;
      }
      return v;
    }
    case Opcode::dup:
      return value_before(p, f, mid, j, 0);
    case Opcode::call:
    case Opcode::callvirt:
    case Opcode::newobj:
      v.kind = Val::Kind::call_result;
      return v;
    default:
      return v;
  }
}

}  // namespace

Effect effect(const Program& p, const MethodDef& m, const Instruction& ins) {
  switch (ins.op) {
    case Opcode::ldc:
    case Opcode::ldloc:
    case Opcode::ldarg:
    case Opcode::ldloca:
    case Opcode::ldarga:
    case Opcode::dup:
      return {0, 1};
    case Opcode::stloc:
    case Opcode::starg:
    case Opcode::brtrue:
    case Opcode::brfalse:
    case Opcode::pop:
      return {1, 0};
    case Opcode::ldfld:
    case Opcode::ldflda:
    case Opcode::ldind:
      return {1, 1};
    case Opcode::ldelem:
    case Opcode::ldelema:
    case Opcode::binop:
      return {2, 1};
    case Opcode::stfld:
    case Opcode::stind:
      return {2, 0};
    case Opcode::stelem:
      return {3, 0};
    case Opcode::call:
    case Opcode::callvirt: {
      const auto& callee = p.method(ins.method);
      return {static_cast<int>(callee.params.size()), callee.returns_value ? 1 : 0};
    }
    case Opcode::newobj:
      return {static_cast<int>(p.method(ins.method).params.size()), 1};
    case Opcode::ret:
      return {m.returns_value ? 1 : 0, 0};
    case Opcode::br:
    case Opcode::label:
      return {0, 0};
  }
  return {};
}

Facts scan_program(const Program& p) {
  const auto n = p.methods.size();
  Facts f;
  f.leader.resize(n);
  f.preds.resize(n);
  f.rets.resize(n);
  f.family.resize(n);
  f.sites.resize(n);

  for (std::uint32_t mi = 0; mi < n; ++mi) {
    const auto& body = p.methods[mi].body;
    auto& lead = f.leader[mi];
    auto& preds = f.preds[mi];
    lead.assign(body.size(), false);
    preds.assign(body.size(), {});
    for (std::uint32_t k = 0; k < body.size(); ++k) {
      const auto op = body[k].op;
      if (k == 0 || op == Opcode::label) lead[k] = true;
      if (k > 0) {
        const auto prev = body[k - 1].op;
        if (prev == Opcode::br || prev == Opcode::brtrue || prev == Opcode::brfalse ||
            prev == Opcode::ret) {
          lead[k] = true;
        }
        if (prev != Opcode::br && prev != Opcode::ret) preds[k].push_back(k - 1);
      }
      if (op == Opcode::ret) f.rets[mi].push_back(k);
    }
    for (std::uint32_t k = 0; k < body.size(); ++k) {
      const auto op = body[k].op;
      if (op == Opcode::br || op == Opcode::brtrue || op == Opcode::brfalse) {
        preds[body[k].target].push_back(k);
      }
    }
    for (auto& v : preds) {
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
    }
  }

  // Overridden method per override, by walking up the parent chain.
  std::vector<std::optional<MethodId>> up(n);
  for (std::uint32_t mi = 0; mi < n; ++mi) {
    const auto& m = p.methods[mi];
    if (!m.override_flag) continue;
    for (auto c = p.classes[m.owner.value].parent; c && !up[mi]; c = p.classes[c->value].parent) {
      for (MethodId cand : p.classes[c->value].methods) {
        const auto& cm = p.method(cand);
        if (cm.name == m.name && (cm.virtual_flag || cm.override_flag)) {
          up[mi] = cand;
          break;
        }
      }
    }
  }
  for (std::uint32_t mi = 0; mi < n; ++mi) {
    const auto& m = p.methods[mi];
    if (!m.virtual_flag && !m.override_flag) continue;
    f.family[mi].push_back(MethodId{mi});
    for (std::uint32_t o = 0; o < n; ++o) {
      for (auto a = up[o]; a; a = up[a->value]) {
        if (a->value == mi) {
          f.family[mi].push_back(MethodId{o});
          break;
        }
      }
    }
  }

  for (std::uint32_t ci = 0; ci < n; ++ci) {
    const auto& body = p.methods[ci].body;
    for (std::uint32_t k = 0; k < body.size(); ++k) {
      const auto& ins = body[k];
      if (ins.op == Opcode::call || ins.op == Opcode::newobj) {
        f.sites[ins.method.value].emplace_back(MethodId{ci}, k);
      } else if (ins.op == Opcode::callvirt) {
        for (MethodId t : f.family[ins.method.value]) f.sites[t.value].emplace_back(MethodId{ci}, k);
      }
    }
  }
  for (auto& s : f.sites) std::sort(s.begin(), s.end());
  return f;
}

std::vector<MethodId> call_targets(const Facts& f, const Instruction& call) {
  if (call.op == Opcode::callvirt) return f.family[call.method.value];
  return {call.method};
}

Val value_before(const Program& p, const Facts& f, MethodId mid, std::uint32_t k,
                 std::uint32_t from_top) {
  const auto& m = p.method(mid);
  const auto& lead = f.leader[mid.value];
  std::int64_t need = from_top;
  if (lead[k]) return {};
  for (std::uint32_t j = k; j-- > 0;) {
    auto e = effect(p, m, m.body[j]);
    if (need < e.pushes) return survive(p, f, mid, produced_by(p, f, mid, j), j, k);
    need += e.pops - e.pushes;
    if (lead[j]) break;
  }
  return {};
}

Target store_target(const Program& p, const Facts& f, MethodId mid, std::uint32_t k) {
  const auto& ins = p.method(mid).body[k];
  Target t;
  switch (ins.op) {
    case Opcode::stloc:
    case Opcode::starg:
      t.kind = Target::Kind::direct;
      t.var = ins.var;
      return t;
    case Opcode::stfld: {
      Val base = value_before(p, f, mid, k, 1);
      if (base.kind == Val::Kind::value_of) {
        t.kind = Target::Kind::field;
        t.var = base.var;
        t.field = ins.field;
      }
      return t;
    }
    case Opcode::stelem: {
      Val base = value_before(p, f, mid, k, 2);
      if (base.kind == Val::Kind::value_of) {
        t.kind = Target::Kind::element;
        t.var = base.var;
      }
      return t;
    }
    case Opcode::stind: {
      Val a = value_before(p, f, mid, k, 1);
      if (a.kind == Val::Kind::address_of) {
        t.kind = Target::Kind::direct;
        t.var = a.var;
      } else if (a.kind == Val::Kind::field_addr && a.has_base) {
        t.kind = Target::Kind::field;
        t.var = a.var;
        t.field = a.field;
      } else if (a.kind == Val::Kind::elem_addr && a.has_base) {
        t.kind = Target::Kind::element;
        t.var = a.var;
      }
      return t;
    }
    default:
      return t;
  }
}

}  // namespace duct::oracle::detail
