// Exhaustive backward path enumeration. Each path is followed instruction by
// instruction; a loop is unrolled by allowing every instruction to be seen
// 1 + max_loop_unroll times per frame. Calls that receive the tracked
// variable are followed into every dispatch target, and a path through the
// callee that reaches its entry resumes in the caller before the call.

#include <map>

#include "duct/oracle.hpp"
#include "internal.hpp"

namespace duct::oracle {

namespace {

using detail::Target;
using detail::Val;

enum class Mode { own, byref_kill, byref_nokill, byval };

struct Frame {
  MethodId method{};
  VarRef var{};
  Selector sel{};
  Mode mode = Mode::own;
  std::string note;
  std::uint32_t depth = 0;
  std::vector<std::uint32_t> seen;
};

struct Bind {
  std::uint32_t formal = 0;
  Selector sel{};
  Mode mode = Mode::own;
};

class Enumerator {
 public:
  Enumerator(const Program& p, const OracleBounds& b, bool kill_rule)
      : p_(p), b_(b), kill_rule_(kill_rule), facts_(detail::scan_program(p)) {}

  ReferenceChain run(const UseSite& use) {
    Frame top = frame(use.method, use.variable.var, use.variable.selector, Mode::own, 0);
    if (walk(top, use.instr) && top.var.kind == VarKind::arg) ascend(top);
    ReferenceChain out;
    for (const auto& [site, info] : found_) {
      out.definitions.insert({site.first, site.second, info.first, info.second});
    }
    out.paths = paths_;
    return out;
  }

 private:
  Frame frame(MethodId m, VarRef v, Selector sel, Mode mode, std::uint32_t depth) {
    Frame f{m, v, sel, mode, {}, depth, {}};
    f.seen.assign(p_.method(m).body.size(), 0);
    if (mode != Mode::own) {
      f.note = "via call " + p_.method_name(m) + (mode == Mode::byval ? " → object " : " → byref ") +
               p_.method(m).params[v.slot].name;
    }
    return f;
  }

  void define(MethodId m, std::uint32_t k, DefinitionKind kind, const std::string& note) {
    auto key = std::make_pair(m, k);
    auto info = std::make_pair(kind, note);
    auto it = found_.find(key);
    if (it == found_.end()) {
      found_.emplace(key, info);
    } else if (info < it->second) {
      it->second = info;
    }
  }

  void end_path() {
    if (++paths_ > b_.max_paths) {
      throw BoundsError("max_paths", "more than " + std::to_string(b_.max_paths) + " paths");
    }
  }

  bool can_kill(Mode m) const { return m == Mode::own || m == Mode::byref_kill; }

  // Returns {report, kill, kind}.
  std::tuple<bool, bool, DefinitionKind> match(const Frame& f, const Target& t) const {
    switch (t.kind) {
      case Target::Kind::unknown:
        return {true, false, DefinitionKind::unknown_address};
      case Target::Kind::direct:
        if (t.var != f.var || f.mode == Mode::byval) break;
        return {true, can_kill(f.mode),
                f.mode == Mode::own ? DefinitionKind::direct_store
                                    : DefinitionKind::byref_callee_store};
      case Target::Kind::field:
        if (t.var != f.var) break;
        if (f.sel.kind == Selector::Kind::none) return {true, false, DefinitionKind::field_store};
        if (f.sel.kind == Selector::Kind::field && f.sel.field == t.field) {
          return {true, can_kill(f.mode), DefinitionKind::field_store};
        }
        break;
      case Target::Kind::element:
        if (t.var != f.var || f.sel.kind == Selector::Kind::field) break;
        return {true, false, DefinitionKind::element_store};
    }
    return {false, false, DefinitionKind::direct_store};
  }

  std::optional<Bind> bind(const Frame& f, const Val& a, std::uint32_t formal) const {
    if (a.var != f.var) return std::nullopt;
    switch (a.kind) {
      case Val::Kind::address_of:
        return Bind{formal, f.sel, f.mode == Mode::own ? Mode::byref_kill : f.mode};
      case Val::Kind::value_of:
        return Bind{formal, f.sel, Mode::byval};
      case Val::Kind::field_addr:
        if (!a.has_base) return std::nullopt;
        if (f.sel.kind == Selector::Kind::field && f.sel.field == a.field) {
          return Bind{formal, {}, can_kill(f.mode) ? Mode::byref_kill : Mode::byref_nokill};
        }
        if (f.sel.kind == Selector::Kind::none) return Bind{formal, {}, Mode::byref_nokill};
        return std::nullopt;
      case Val::Kind::elem_addr:
        if (!a.has_base || f.sel.kind == Selector::Kind::field) return std::nullopt;
        return Bind{formal, {}, Mode::byref_nokill};
      default:
        return std::nullopt;
    }
  }

  // False when the path ends at the call.
  bool through_call(const Frame& f, std::uint32_t k) {
    const auto& ins = p_.method(f.method).body[k];
    const auto n = static_cast<std::uint32_t>(p_.method(ins.method).params.size());
    std::vector<Bind> binds;
    for (std::uint32_t i = 0; i < n; ++i) {
      Val a = detail::value_before(p_, facts_, f.method, k, n - 1 - i);
      if (auto b = bind(f, a, i)) binds.push_back(*b);
    }
    if (binds.empty()) return true;
    if (f.depth + 1 > b_.max_call_depth) {
      throw BoundsError("max_call_depth", "call nesting deeper than " +
                                              std::to_string(b_.max_call_depth));
    }
    bool returns = false;
    for (MethodId t : detail::call_targets(facts_, ins)) {
      for (const auto& b : binds) {
        Frame g = frame(t, VarRef{VarKind::arg, b.formal}, b.sel, b.mode, f.depth + 1);
        for (std::uint32_t r : facts_.rets[t.value]) returns = walk(g, r + 1) || returns;
      }
    }
    return !kill_rule_ || returns;
  }

  // Paths backwards from just before `pc`. True if one reaches the entry.
  bool walk(Frame& f, std::uint32_t pc) {
    const auto& body = p_.method(f.method).body;
    const auto& lead = facts_.leader[f.method.value];
    std::vector<std::uint32_t> marked;
    auto unmark = [&] {
      for (auto k : marked) --f.seen[k];
    };
    bool reached = false;
    while (true) {
      if (pc == 0) {
        end_path();
        reached = true;
        break;
      }
      const std::uint32_t k = pc - 1;
      if (f.seen[k] > b_.max_loop_unroll) break;  // pruned
      ++f.seen[k];
      marked.push_back(k);

      const auto op = body[k].op;
      bool stop = false;
      if (is_store(op)) {
        auto [report, kill, kind] = match(f, detail::store_target(p_, facts_, f.method, k));
        if (report) define(f.method, k, kind, f.note);
        stop = kill;
      } else if (is_call(op)) {
        stop = !through_call(f, k);
      }
      if (stop) {
        end_path();
        break;
      }
      if (lead[k]) {
        if (k == 0) {
          end_path();
          reached = true;
          break;
        }
        for (std::uint32_t from : facts_.preds[f.method.value][k]) {
          reached = walk(f, from + 1) || reached;
        }
        break;
      }
      pc = k;
    }
    unmark();
    return reached;
  }

  void ascend(const Frame& f) {
    if (f.depth + 1 > b_.max_call_depth) {
      throw BoundsError("max_call_depth", "caller chain longer than " +
                                              std::to_string(b_.max_call_depth));
    }
    const auto n = static_cast<std::uint32_t>(p_.method(f.method).params.size());
    for (const auto& [caller, site] : facts_.sites[f.method.value]) {
      Val a = detail::value_before(p_, facts_, caller, site, n - 1 - f.var.slot);
      std::optional<std::pair<VarRef, Selector>> next;
      if (a.kind == Val::Kind::address_of || a.kind == Val::Kind::value_of) {
        next.emplace(a.var, f.sel);
      } else if (a.kind == Val::Kind::field_addr && a.has_base &&
                 f.sel.kind == Selector::Kind::none) {
        next.emplace(a.var, Selector::of_field(a.field));
      } else if (a.kind == Val::Kind::elem_addr && a.has_base &&
                 f.sel.kind == Selector::Kind::none) {
        next.emplace(a.var, Selector::element());
      }
      if (!next) {
        auto at = a.origin >= 0 ? static_cast<std::uint32_t>(a.origin) : site;
        define(caller, at, DefinitionKind::direct_store, "argument at call site");
        continue;
      }
      Frame g = frame(caller, next->first, next->second, Mode::own, f.depth + 1);
      if (walk(g, site) && g.var.kind == VarKind::arg) ascend(g);
    }
  }

  const Program& p_;
  OracleBounds b_;
  bool kill_rule_;
  detail::Facts facts_;
  std::map<std::pair<MethodId, std::uint32_t>, std::pair<DefinitionKind, std::string>> found_;
  std::size_t paths_ = 0;
};

}  // namespace

ReferenceChain reference_ud_chain(const Program& program, const UseSite& use,
                                  const OracleBounds& bounds, bool kill_rule) {
  return Enumerator(program, bounds, kill_rule).run(use);
}

}  // namespace duct::oracle
