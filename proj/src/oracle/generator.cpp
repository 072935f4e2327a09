// Random MiniIL programs for property tests. Programs are built as text and
// then loaded, so anything emitted here also exercises the loader.
//
// Shape: a root class Obj with int fields f0/f1 (objects double as arrays)
// and a constructor, a small class tree below it, and methods whose calls
// form a DAG over the generation order. Virtual families occupy contiguous
// slots in that order, so a callvirt never reaches back to its caller.

#include <algorithm>
#include <map>
#include <random>
#include <sstream>

#include "duct/oracle.hpp"

namespace duct::oracle {

namespace {

constexpr std::uint32_t kNone = 0xffffffffu;
constexpr std::size_t kExecutableSteps = 200000;
constexpr std::uint32_t kMaxCallsPerMethod = 4;
constexpr std::uint32_t kMaxUsesPerMethod = 4;

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : g_(seed) {}
  // mt19937_64 output is fixed by the standard; the distributions are not.
  std::uint32_t below(std::size_t n) {
    return n <= 1 ? 0 : static_cast<std::uint32_t>(g_() % n);
  }
  std::uint32_t between(std::uint32_t lo, std::uint32_t hi) { return lo + below(hi - lo + 1); }
  bool chance(double p) { return static_cast<double>(g_() >> 11) * 0x1.0p-53 < p; }

 private:
  std::mt19937_64 g_;
};

enum class Ty { int_, obj };

struct Sig {
  std::vector<std::pair<Ty, bool>> params;  // type, byref
  std::optional<Ty> ret;
};

struct Plan {
  std::string cls;
  std::string name;
  bool virt = false;
  bool over = false;
  bool ctor = false;
  std::uint32_t family = kNone;  // slot of the family's base
  Sig sig;
};

struct Var {
  std::string name;
  Ty ty = Ty::int_;
  bool arg = false;
  bool byref = false;
  bool counter = false;
};

struct UseRec {
  std::uint32_t instr = 0;
  std::string var;
  int sel = 0;  // 0 none, 1 f0, 2 f1, 3 element
};

struct ClassPlan {
  std::string name;
  std::uint32_t parent = kNone;
  std::uint32_t depth = 0;
};

class Generator {
 public:
  Generator(const GeneratorLimits& l, std::uint64_t seed) : lim_(l), rng_(seed) {}

  std::string build() {
    plan_classes();
    plan_methods();
    bodies_.resize(plans_.size());
    uses_.resize(plans_.size());
    for (std::uint32_t i = 0; i < plans_.size(); ++i) gen_method(i);
    return render();
  }

  const std::vector<Plan>& plans() const { return plans_; }
  const std::vector<std::vector<UseRec>>& uses() const { return uses_; }
  std::vector<std::int64_t> entry_inputs() {
    std::vector<std::int64_t> in;
    for (std::size_t i = 0; i < plans_[0].sig.params.size(); ++i) {
      in.push_back(static_cast<std::int64_t>(rng_.below(5)) - 2);
    }
    return in;
  }

 private:
  bool obj_allowed() const { return has_ctor_ || !lim_.executable; }

  void plan_classes() {
    classes_.push_back({"Obj", kNone, 0});
    if (lim_.max_class_depth == 0) return;
    std::uint32_t extra = rng_.between(0, std::min<std::uint32_t>(4, lim_.max_class_depth + 1));
    for (std::uint32_t i = 0; i < extra; ++i) {
      std::vector<std::uint32_t> parents;
      for (std::uint32_t c = 0; c < classes_.size(); ++c) {
        if (classes_[c].depth < lim_.max_class_depth) parents.push_back(c);
      }
      std::uint32_t p = parents[rng_.below(parents.size())];
      classes_.push_back({"C" + std::to_string(i + 1), p, classes_[p].depth + 1});
    }
  }

  bool descends(std::uint32_t c, std::uint32_t ancestor) const {
    for (auto k = classes_[c].parent; k != kNone; k = classes_[k].parent) {
      if (k == ancestor) return true;
    }
    return false;
  }

  Sig random_sig(bool entry) {
    Sig s;
    std::uint32_t n = rng_.between(0, 3);
    for (std::uint32_t i = 0; i < n; ++i) {
      if (entry && lim_.executable) {
        s.params.emplace_back(Ty::int_, false);
        continue;
      }
      Ty t = obj_allowed() && rng_.chance(0.35) ? Ty::obj : Ty::int_;
      s.params.emplace_back(t, !entry && rng_.chance(lim_.byref_probability));
    }
    if (rng_.chance(0.5)) s.ret = obj_allowed() && rng_.chance(0.25) ? Ty::obj : Ty::int_;
    return s;
  }

  void plan_methods() {
    std::uint32_t cap = std::max<std::uint32_t>(1, lim_.max_methods);
    has_ctor_ = cap >= 2 && (lim_.executable || rng_.chance(0.7));
    std::uint32_t total = lim_.executable ? std::max<std::uint32_t>(cap - has_ctor_, 1)
                                          : rng_.between(1, cap - has_ctor_);
    std::map<std::string, std::uint32_t> per_class;
    auto fresh_name = [&](std::uint32_t cls) {
      return "m" + std::to_string(per_class[classes_[cls].name]++);
    };
    std::uint32_t families = 0;
    while (plans_.size() < total) {
      bool entry = plans_.empty();
      std::uint32_t cls = rng_.below(classes_.size());
      std::vector<std::uint32_t> below;
      for (std::uint32_t c = 0; c < classes_.size(); ++c) {
        if (descends(c, cls)) below.push_back(c);
      }
      std::uint32_t room = total - static_cast<std::uint32_t>(plans_.size());
      if (!entry && rng_.chance(lim_.virtual_probability)) {
        Sig sig = random_sig(false);
        std::string name = "v" + std::to_string(families++);
        auto base = static_cast<std::uint32_t>(plans_.size());
        plans_.push_back({classes_[cls].name, name, true, false, false, base, sig});
        std::uint32_t overrides = rng_.between(0, std::min<std::uint32_t>(
                                                      static_cast<std::uint32_t>(below.size()), room - 1));
        // Distinct subclasses, in a random order.
        for (std::uint32_t i = 0; i < overrides; ++i) {
          std::uint32_t j = i + rng_.below(below.size() - i);
          std::swap(below[i], below[j]);
          plans_.push_back({classes_[below[i]].name, name, false, true, false, base, sig});
        }
        continue;
      }
      plans_.push_back({classes_[cls].name, fresh_name(cls), false, false, false, kNone,
                        random_sig(entry)});
    }
    if (has_ctor_) plans_.push_back({"Obj", "make", false, false, true, kNone, {}});
  }

  std::string ref(std::uint32_t j) const { return plans_[j].cls + "::" + plans_[j].name; }

  // ---- per-method state ----

  void emit(std::string text) { body_.emplace_back(std::move(text), line_); }
  void new_line() { line_ = ++line_counter_; }
  std::uint32_t here() const { return static_cast<std::uint32_t>(body_.size()); }
  std::string label() { return "L" + std::to_string(labels_++); }

  std::vector<const Var*> vars_of(Ty t, bool writable) const {
    std::vector<const Var*> out;
    for (const auto& v : vars_) {
      if (v.ty == t && !(writable && v.counter)) out.push_back(&v);
    }
    return out;
  }

  template <class T>
  const T& pick(const std::vector<T>& v) {
    return v[rng_.below(v.size())];
  }

  void read(const Var& v) {
    uses_here_.push_back({here(), v.name, 0});
    emit(std::string(v.arg ? "ldarg " : "ldloc ") + v.name);
  }

  void store(const Var& v) { emit(std::string(v.arg ? "starg " : "stloc ") + v.name); }

  std::string field() { return rng_.chance(0.5) ? "f0" : "f1"; }

  void field_read(const Var& x) {
    read(x);
    std::string f = field();
    uses_here_.push_back({here(), x.name, f == "f0" ? 1 : 2});
    emit("ldfld Obj." + f);
  }

  void elem_read(const Var& x) {
    read(x);
    emit("ldc " + std::to_string(rng_.below(3)));
    uses_here_.push_back({here(), x.name, 3});
    emit("ldelem");
  }

  std::vector<std::uint32_t> callees(std::optional<Ty> want) const {
    std::vector<std::uint32_t> out;
    if (calls_ >= kMaxCallsPerMethod) return out;
    for (std::uint32_t j = self_ + 1; j < plans_.size(); ++j) {
      const auto& p = plans_[j];
      if (p.ctor) continue;
      if (plans_[self_].family != kNone && p.family == plans_[self_].family) continue;
      if (want && p.sig.ret != want) continue;
      bool ok = true;
      for (auto [t, byref] : p.sig.params) {
        if (byref && !can_address(t)) ok = false;
      }
      if (ok) out.push_back(j);
    }
    return out;
  }

  bool can_address(Ty t) const {
    if (!vars_of(t, true).empty()) return true;
    return t == Ty::int_ && !vars_of(Ty::obj, false).empty();
  }

  void address(Ty t) {
    auto direct = vars_of(t, true);
    auto objs = vars_of(Ty::obj, false);
    std::uint32_t choice = direct.empty() ? 1 + rng_.below(2) : 0;
    if (!direct.empty() && t == Ty::int_ && !objs.empty() && rng_.chance(0.35)) {
      choice = 1 + rng_.below(2);
    }
    if (choice == 0) {
      const Var& v = *pick(direct);
      emit(std::string(v.arg ? "ldarga " : "ldloca ") + v.name);
    } else if (choice == 1) {
      read(*pick(objs));
      emit("ldflda Obj." + field());
    } else {
      read(*pick(objs));
      emit("ldc " + std::to_string(rng_.below(3)));
      emit("ldelema");
    }
  }

  void call(std::uint32_t j, int depth) {
    ++calls_;
    for (auto [t, byref] : plans_[j].sig.params) {
      if (byref) {
        address(t);
      } else {
        value(t, depth + 1);
      }
    }
    bool virt = plans_[j].virt && rng_.chance(0.8);
    emit((virt ? "callvirt " : "call ") + ref(j));
  }

  void value(Ty t, int depth) {
    if (t == Ty::obj) {
      auto objs = vars_of(Ty::obj, false);
      auto fns = depth < 2 ? callees(Ty::obj) : std::vector<std::uint32_t>{};
      std::uint32_t r = rng_.below(10);
      if (!fns.empty() && r == 0) {
        call(pick(fns), depth);
      } else if (!objs.empty() && (r < 7 || !has_ctor_)) {
        read(*pick(objs));
      } else if (has_ctor_) {
        emit("newobj Obj::make");
      } else {
        emit("ldc null");
      }
      return;
    }
    auto ints = vars_of(Ty::int_, false);
    auto objs = vars_of(Ty::obj, false);
    while (true) {
      switch (rng_.below(12)) {
        case 0:
        case 1:
        case 2:
          emit("ldc " + std::to_string(static_cast<int>(rng_.below(9)) - 2));
          return;
        case 3:
        case 4:
        case 5:
          if (ints.empty()) break;
          read(*pick(ints));
          return;
        case 6:
        case 7:
          if (objs.empty()) break;
          field_read(*pick(objs));
          return;
        case 8:
          if (objs.empty()) break;
          elem_read(*pick(objs));
          return;
        case 9:
          if (!can_address(Ty::int_)) break;
          address(Ty::int_);
          emit("ldind");
          return;
        case 10:
          if (depth >= 2) break;
          value(Ty::int_, depth + 1);
          value(Ty::int_, depth + 1);
          emit("binop");
          return;
        default: {
          if (depth >= 2) break;
          auto fns = callees(Ty::int_);
          if (fns.empty()) break;
          call(pick(fns), depth);
          return;
        }
      }
    }
  }

  // One statement; the operand stack is empty before and after.
  void statement() {
    new_line();
    auto wint = vars_of(Ty::int_, true);
    auto wobj = vars_of(Ty::obj, true);
    auto objs = vars_of(Ty::obj, false);
    while (true) {
      switch (rng_.below(16)) {
        case 0:
        case 1:
        case 2: {
          std::vector<const Var*> all = wint;
          all.insert(all.end(), wobj.begin(), wobj.end());
          const Var& v = *pick(all);
          value(v.ty, 0);
          store(v);
          return;
        }
        case 3:
          if (objs.empty()) break;
          read(*pick(objs));
          value(Ty::int_, 1);
          emit("stfld Obj." + field());
          return;
        case 4:
          if (objs.empty()) break;
          read(*pick(objs));
          emit("ldc " + std::to_string(rng_.below(3)));
          value(Ty::int_, 1);
          emit("stelem");
          return;
        case 5:
        case 6: {
          Ty t = !wobj.empty() && rng_.chance(0.3) ? Ty::obj : Ty::int_;
          if (!can_address(t)) break;
          address(t);
          value(t, 1);
          emit("stind");
          return;
        }
        case 7: {
          // Duplicated value stored twice.
          Ty t = !wobj.empty() && rng_.chance(0.3) ? Ty::obj : Ty::int_;
          auto w = t == Ty::obj ? wobj : wint;
          value(t, 1);
          emit("dup");
          store(*pick(w));
          store(*pick(w));
          return;
        }
        case 8:
          if (objs.empty()) break;
          read(*pick(objs));
          emit("dup");
          value(Ty::int_, 1);
          emit("stfld Obj.f0");
          value(Ty::int_, 1);
          emit("stfld Obj.f1");
          return;
        case 9: {
          // Base read, then the variable changes before the store consumes it.
          if (wobj.empty()) break;
          const Var& x = *pick(wobj);
          read(x);
          if (rng_.chance(0.5) || callees(std::nullopt).empty()) {
            value(Ty::obj, 1);
            store(x);
          } else {
            std::uint32_t j = pick(callees(std::nullopt));
            call(j, 1);
            if (plans_[j].sig.ret) emit("pop");
          }
          value(Ty::int_, 1);
          emit("stfld Obj." + field());
          return;
        }
        case 10: {
          // Address carried across a block boundary.
          if (blocks_ + 1 > lim_.max_blocks_per_method || !can_address(Ty::int_)) break;
          ++blocks_;
          address(Ty::int_);
          value(Ty::int_, 1);
          std::string l = label();
          emit("brtrue " + l);
          emit("label " + l);
          value(Ty::int_, 1);
          emit("stind");
          return;
        }
        case 11:
        case 12: {
          auto fns = callees(std::nullopt);
          if (fns.empty()) break;
          std::uint32_t j = pick(fns);
          call(j, 0);
          if (plans_[j].sig.ret) emit("pop");
          return;
        }
        case 13:
          if (wobj.empty() || !has_ctor_) break;
          emit("newobj Obj::make");
          store(*pick(wobj));
          return;
        default: {
          const Var& v = pick(vars_);
          read(v);
          emit("pop");
          return;
        }
      }
    }
  }

  void sequence(int depth, bool in_loop) {
    std::uint32_t n = rng_.between(1, depth == 0 ? 5 : 3);
    for (std::uint32_t i = 0; i < n; ++i) {
      std::uint32_t r = rng_.below(10);
      std::uint32_t left = lim_.max_blocks_per_method - blocks_;
      if (r < 2 && depth < 2 && left >= 3) {
        diamond(depth, in_loop);
      } else if (r == 2 && !in_loop && left >= 3 && counter_) {
        loop(depth);
      } else if (r == 3 && left >= 2) {
        early_return(depth);
      } else {
        statement();
      }
    }
  }

  void condition() {
    new_line();
    value(Ty::int_, 1);
  }

  void diamond(int depth, bool in_loop) {
    blocks_ += 3;
    std::string else_l = label();
    std::string join_l = label();
    condition();
    emit("brfalse " + else_l);
    sequence(depth + 1, in_loop);
    emit("br " + join_l);
    emit("label " + else_l);
    if (rng_.chance(0.7)) sequence(depth + 1, in_loop);
    emit("label " + join_l);
  }

  void loop(int depth) {
    blocks_ += 3;
    const Var& c = *counter_;
    std::string head = label();
    std::string exit = label();
    new_line();
    emit("ldc " + std::to_string(-static_cast<int>(rng_.between(1, 3))));
    store(c);
    emit("label " + head);
    read(c);
    emit("brfalse " + exit);
    sequence(depth + 1, true);
    new_line();
    read(c);
    emit("ldc 1");
    emit("binop");
    store(c);
    emit("br " + head);
    emit("label " + exit);
  }

  void ret() {
    new_line();
    if (const auto& t = plans_[self_].sig.ret) value(*t, 1);
    emit("ret");
  }

  void early_return(int depth) {
    blocks_ += 2;
    std::string l = label();
    condition();
    emit("brtrue " + l);
    if (depth < 2 && rng_.chance(0.5)) statement();
    ret();
    emit("label " + l);
  }

  void gen_method(std::uint32_t i) {
    self_ = i;
    body_.clear();
    vars_.clear();
    uses_here_.clear();
    blocks_ = 1;
    labels_ = 0;
    calls_ = 0;
    counter_ = nullptr;
    const Plan& p = plans_[i];
    if (p.ctor) {
      new_line();
      emit("ret");
      bodies_[i] = body_;
      return;
    }
    for (std::size_t k = 0; k < p.sig.params.size(); ++k) {
      vars_.push_back({"p" + std::to_string(k), p.sig.params[k].first, true,
                       p.sig.params[k].second});
    }
    std::uint32_t locals = rng_.between(1, std::max<std::uint32_t>(1, lim_.max_locals));
    bool with_counter = locals >= 2 && lim_.max_blocks_per_method >= 4 && rng_.chance(0.6);
    for (std::uint32_t k = 0; k + with_counter < locals; ++k) {
      Ty t = k > 0 && obj_allowed() && rng_.chance(0.35) ? Ty::obj : Ty::int_;
      vars_.push_back({"a" + std::to_string(k), t, false, false});
    }
    if (with_counter) {
      vars_.push_back({"c", Ty::int_, false, false, true});
      counter_ = &vars_.back();
    }

    // Prologue: executable programs start every local with a value.
    for (const auto& v : vars_) {
      if (v.arg || (!lim_.executable && (v.counter || rng_.chance(0.3)))) continue;
      new_line();
      if (v.ty == Ty::obj) {
        emit(has_ctor_ ? "newobj Obj::make" : "ldc null");
      } else {
        emit("ldc " + std::to_string(rng_.below(5)));
      }
      store(v);
    }
    if (lim_.max_blocks_per_method <= 1) {
      std::uint32_t n = rng_.between(1, 6);
      for (std::uint32_t k = 0; k < n; ++k) statement();
    } else {
      sequence(0, false);
    }
    if (std::none_of(uses_here_.begin(), uses_here_.end(),
                     [](const UseRec& u) { return u.sel == 0; })) {
      new_line();
      read(vars_.front());
      emit("pop");
    }
    ret();
    bodies_[i] = body_;

    // A deterministic sample of the reads, always including the last.
    auto& out = uses_[i];
    out.push_back(uses_here_.back());
    for (std::uint32_t k = 1; k < kMaxUsesPerMethod && k < uses_here_.size(); ++k) {
      out.push_back(uses_here_[rng_.below(uses_here_.size() - 1)]);
    }
    std::sort(out.begin(), out.end(), [](const UseRec& a, const UseRec& b) {
      return std::tie(a.instr, a.sel) < std::tie(b.instr, b.sel);
    });
    out.erase(std::unique(out.begin(), out.end(),
                          [](const UseRec& a, const UseRec& b) {
                            return a.instr == b.instr && a.sel == b.sel;
                          }),
              out.end());
  }

  std::string render() const {
    std::ostringstream os;
    os << "; generated, seed " << lim_.seed << "\n";
    for (const auto& c : classes_) {
      os << "\n.class " << c.name;
      if (c.parent != kNone) os << " : " << classes_[c.parent].name;
      os << "\n";
      if (c.parent == kNone) os << ".field f0\n.field f1\n";
      for (std::uint32_t i = 0; i < plans_.size(); ++i) {
        const auto& p = plans_[i];
        if (p.cls != c.name) continue;
        os << "\n.method " << (p.virt ? "virtual " : p.over ? "override " : "") << p.name << "(";
        for (std::size_t k = 0; k < p.sig.params.size(); ++k) {
          if (k) os << ", ";
          if (p.sig.params[k].second) os << "ref ";
          os << "p" << k;
        }
        os << ")" << (p.sig.ret ? " returns" : "") << "\n";
        std::vector<std::string> locals;
        for (const auto& [text, line] : bodies_[i]) {
          auto sp = text.find(' ');
          if (sp != std::string::npos && (text.compare(0, sp, "stloc") == 0 ||
                                          text.compare(0, sp, "ldloc") == 0 ||
                                          text.compare(0, sp, "ldloca") == 0)) {
            auto name = text.substr(sp + 1);
            if (std::find(locals.begin(), locals.end(), name) == locals.end()) {
              locals.push_back(name);
            }
          }
        }
        std::sort(locals.begin(), locals.end());
        if (!locals.empty()) {
          os << ".locals ";
          for (std::size_t k = 0; k < locals.size(); ++k) os << (k ? ", " : "") << locals[k];
          os << "\n";
        }
        std::uint32_t last = 0;
        for (const auto& [text, line] : bodies_[i]) {
          if (line != last) os << ".line gen.src:" << line << "\n";
          last = line;
          os << "  " << text << "\n";
        }
        os << ".end\n";
      }
      os << ".end\n";
    }
    return os.str();
  }

  GeneratorLimits lim_;
  Rng rng_;
  bool has_ctor_ = false;
  std::vector<ClassPlan> classes_;
  std::vector<Plan> plans_;
  std::vector<std::vector<std::pair<std::string, std::uint32_t>>> bodies_;
  std::vector<std::vector<UseRec>> uses_;

  std::uint32_t self_ = 0;
  std::vector<std::pair<std::string, std::uint32_t>> body_;
  std::vector<Var> vars_;
  const Var* counter_ = nullptr;
  std::vector<UseRec> uses_here_;
  std::uint32_t blocks_ = 1;
  std::uint32_t labels_ = 0;
  std::uint32_t calls_ = 0;
  std::uint32_t line_ = 0;
  std::uint32_t line_counter_ = 0;
};

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

GeneratedProgram attempt(const GeneratorLimits& limits, std::uint64_t seed) {
  Generator g(limits, seed);
  GeneratedProgram out;
  out.text = g.build();
  out.program = parse_program(out.text);
  const auto& plans = g.plans();
  for (std::uint32_t i = 0; i < plans.size(); ++i) {
    auto id = out.program.find_method(plans[i].cls + "::" + plans[i].name);
    if (i == 0) out.entry = *id;
    const auto& m = out.program.method(*id);
    for (const auto& u : g.uses()[i]) {
      UseSite site;
      site.method = *id;
      site.instr = u.instr;
      site.variable.method = *id;
      if (u.var[0] == 'p') {
        site.variable.var = VarRef{VarKind::arg, static_cast<std::uint32_t>(std::stoul(u.var.substr(1)))};
      } else {
        auto it = std::find(m.locals.begin(), m.locals.end(), u.var);
        site.variable.var = VarRef{VarKind::local, static_cast<std::uint32_t>(it - m.locals.begin())};
      }
      if (u.sel == 1 || u.sel == 2) {
        auto obj = out.program.find_class("Obj");
        site.variable.selector = Selector::of_field(*out.program.find_field(*obj, u.sel == 1 ? "f0" : "f1"));
      } else if (u.sel == 3) {
        site.variable.selector = Selector::element();
      }
      out.uses.push_back(site);
    }
  }
  out.inputs = g.entry_inputs();
  return out;
}

}  // namespace

GeneratedProgram generate_random_program(const GeneratorLimits& limits) {
  std::uint64_t seed = limits.seed;
  for (int tries = 0;; ++tries) {
    auto gen = attempt(limits, seed);
    if (!limits.executable || tries == 64) return gen;
    try {
      interpret(gen.program, gen.entry, gen.inputs, kExecutableSteps);
      return gen;
    } catch (const InterpreterError&) {
      seed = mix(seed + static_cast<std::uint64_t>(tries) + 1);
    }
  }
}

}  // namespace duct::oracle
