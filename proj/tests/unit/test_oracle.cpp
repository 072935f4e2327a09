#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <set>

#include "duct/oracle.hpp"
#include "support.hpp"

using namespace duct;
using namespace duct::oracle;
using testing::method_id;
using testing::one_method;

namespace {

std::set<std::pair<std::string, std::uint32_t>> defs(const Program& p, const ReferenceChain& c) {
  std::set<std::pair<std::string, std::uint32_t>> out;
  for (const auto& d : c.definitions) out.emplace(p.method_name(d.method), d.instr);
  return out;
}

ObservedStore::Target direct(VarRef v) { return {ObservedStore::Target::Kind::direct, v, {}}; }

}  // namespace

TEST_CASE("reference answers") {
  SUBCASE("straight line") {
    auto p = parse_program(one_method("  ldc 1\n  stloc x\n.line t.src:2\n  ldloc x\n  pop\n  ret", "", "x"));
    auto c = reference_ud_chain(p, resolve_use_site(p, "t.src", 2, "x"));
    CHECK(defs(p, c) == std::set<std::pair<std::string, std::uint32_t>>{{"T::m", 1}});
    CHECK(c.paths == 1);
  }
  SUBCASE("diamond") {
    auto p = parse_program(one_method(
        "  ldarg c\n  brtrue T\n  ldc 1\n  stloc x\n  br J\n  label T\n  ldc 2\n  stloc x\n"
        "  label J\n.line t.src:2\n  ldloc x\n  pop\n  ret",
        "c", "x"));
    auto c = reference_ud_chain(p, resolve_use_site(p, "t.src", 2, "x"));
    CHECK(defs(p, c) == std::set<std::pair<std::string, std::uint32_t>>{{"T::m", 3}, {"T::m", 7}});
    CHECK(c.paths == 2);
  }
  SUBCASE("earth W") {
    auto p = testing::load_fixture("earth.mil");
    auto c = reference_ud_chain(p, resolve_use_site(p, "earth.vb", 34, "W"));
    REQUIRE(c.definitions.size() == 1);
    const auto& d = *c.definitions.begin();
    CHECK(p.method_name(d.method) == "Form1::JD_NUM_FOR");
    CHECK(d.instr == 112);
    CHECK(d.kind == DefinitionKind::byref_callee_store);
    CHECK(d.note == "via call Form1::JD_NUM_FOR → byref astroJDnum");
  }
  SUBCASE("kill fixtures") {
    auto p = testing::load_fixture("kill.mil");
    using S = std::set<std::pair<std::string, std::uint32_t>>;
    CHECK(defs(p, reference_ud_chain(p, resolve_use_site(p, "kill.src", 12, "x"))) == S{{"Base::Full", 1}});
    CHECK(defs(p, reference_ud_chain(p, resolve_use_site(p, "kill.src", 22, "x"))) ==
          S{{"Base::Partial", 3}, {"Base::PartialCaller", 1}});
    CHECK(defs(p, reference_ud_chain(p, resolve_use_site(p, "kill.src", 32, "x"))) ==
          S{{"Base::Set", 2}, {"Base::VirtualCaller", 1}});
    CHECK(defs(p, reference_ud_chain(p, resolve_use_site(p, "kill.src", 12, "x"), {}, false)) ==
          S{{"Base::Full", 1}, {"Base::FullCaller", 1}});
  }
}

TEST_CASE("bounds are refused by name") {
  auto rec = testing::load_fixture("mutual.mil");
  try {
    reference_ud_chain(rec, resolve_use_site(rec, "mutual.src", 2, "r"));
    FAIL("answered");
  } catch (const BoundsError& e) {
    CHECK(e.bound() == "max_call_depth");
  }
  // 2^k paths through k diamonds in a row.
  std::string body = "  ldc 0\n  stloc x\n";
  for (int i = 0; i < 12; ++i) {
    auto n = std::to_string(i);
    body += "  ldarg c\n  brtrue T" + n + "\n  ldc 1\n  pop\n  br J" + n + "\n  label T" + n +
            "\n  ldc 2\n  pop\n  label J" + n + "\n";
  }
  body += ".line t.src:2\n  ldloc x\n  pop\n  ret";
  auto p = parse_program(one_method(body, "c", "x"));
  auto use = resolve_use_site(p, "t.src", 2, "x");
  CHECK(reference_ud_chain(p, use).paths == 4096);
  OracleBounds small;
  small.max_paths = 1000;
  try {
    reference_ud_chain(p, use, small);
    FAIL("answered");
  } catch (const BoundsError& e) {
    CHECK(e.bound() == "max_paths");
  }
}

TEST_CASE("generator") {
  SUBCASE("degenerate limits give one straight-line method") {
    GeneratorLimits l{1, 1, 1, 1, 0.3, 0.3, 0, false};
    auto g = generate_random_program(l);
    REQUIRE(g.program.methods.size() == 1);
    for (const auto& i : g.program.methods[0].body) {
      CHECK_FALSE(is_branch(i.op));
      CHECK(i.op != Opcode::label);
    }
    CHECK_FALSE(g.uses.empty());
  }
  SUBCASE("deterministic") {
    GeneratorLimits l;
    l.seed = 42;
    auto a = generate_random_program(l);
    auto b = generate_random_program(l);
    CHECK(a.text == b.text);
    CHECK(a.uses == b.uses);
    l.seed = 43;
    CHECK(generate_random_program(l).text != a.text);
  }
  SUBCASE("round trip, limits and resolvable uses") {
    std::set<Opcode> seen;
    std::size_t virtual_methods = 0, byref_params = 0;
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
      GeneratorLimits l;
      l.seed = seed;
      auto g = generate_random_program(l);
      const auto& p = g.program;
      CHECK(print_program(parse_program(g.text)) == print_program(p));
      CHECK(p.methods.size() <= l.max_methods);
      std::set<std::uint32_t> with_use;
      for (const auto& u : g.uses) {
        with_use.insert(u.method.value);
        const auto& ins = p.method(u.method).body.at(u.instr);
        if (u.variable.selector.kind == Selector::Kind::none) {
          CHECK(ins.var == u.variable.var);
        } else {
          CHECK((ins.op == Opcode::ldfld || ins.op == Opcode::ldelem));
        }
        // The printed location resolves back to a read of the same variable on that line.
        auto loc = p.method(u.method).line_map[u.instr];
        auto names = variables_read_on_line(p, loc.file, loc.line);
        CHECK(std::find(names.begin(), names.end(), p.var_name(u.method, u.variable.var)) != names.end());
      }
      for (std::uint32_t i = 0; i < p.methods.size(); ++i) {
        CHECK(p.methods[i].locals.size() <= l.max_locals);
        bool reads = std::any_of(p.methods[i].body.begin(), p.methods[i].body.end(), [](const Instruction& ins) {
          return ins.op == Opcode::ldloc || ins.op == Opcode::ldarg;
        });
        if (reads) CHECK(with_use.count(i) == 1);
        virtual_methods += p.methods[i].is_virtual();
        for (const auto& pr : p.methods[i].params) byref_params += pr.byref;
        for (const auto& ins : p.methods[i].body) seen.insert(ins.op);
      }
      for (const auto& c : p.classes) {
        std::uint32_t depth = 0;
        for (auto q = c.parent; q; q = p.klass(*q).parent) ++depth;
        CHECK(depth <= l.max_class_depth);
      }
    }
    for (auto op : {Opcode::stloc, Opcode::starg, Opcode::stfld, Opcode::stelem, Opcode::stind, Opcode::call,
                    Opcode::callvirt, Opcode::newobj, Opcode::br, Opcode::brtrue, Opcode::brfalse,
                    Opcode::ldloca, Opcode::ldarga, Opcode::ldflda, Opcode::ldelema, Opcode::dup}) {
      INFO(std::string(opcode_name(op)));
      CHECK(seen.count(op) == 1);
    }
    CHECK(virtual_methods > 100);
    CHECK(byref_params > 100);
  }
  SUBCASE("executable programs run") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      GeneratorLimits l;
      l.seed = seed;
      l.executable = true;
      auto g = generate_random_program(l);
      CHECK_NOTHROW(interpret(g.program, g.entry, g.inputs, 200000));
      CHECK(g.inputs.size() == g.program.method(g.entry).params.size());
    }
  }
}

TEST_CASE("interpreter") {
  SUBCASE("stloc") {
    auto p = parse_program(one_method("  ldc 5\n  stloc a\n  ret", "", "a"));
    auto t = interpret(p, MethodId{0}, {});
    REQUIRE(t.stores.size() == 1);
    CHECK(t.stores[0].instr == 1);
    CHECK(t.stores[0].candidates == std::vector<ObservedStore::Target>{direct({VarKind::local, 0})});
    CHECK(t.steps == 3);
  }
  SUBCASE("stind through ldloca") {
    auto p = parse_program(one_method("  ldloca a\n  ldc 5\n  stind\n  ret", "", "a"));
    auto t = interpret(p, MethodId{0}, {});
    REQUIRE(t.stores.size() == 1);
    CHECK(t.stores[0].candidates == std::vector<ObservedStore::Target>{direct({VarKind::local, 0})});
  }
  SUBCASE("byref call writes the caller's local") {
    auto p = parse_program(
        ".class T\n.method set(ref p)\n.line t:1\n  ldarga p\n  ldc 7\n  stind\n  ret\n.end\n"
        ".method main()\n.locals a\n.line t:2\n  ldloca a\n  call T::set\n  ret\n.end\n.end\n");
    auto t = interpret(p, method_id(p, "T::main"), {});
    REQUIRE(t.stores.size() == 1);
    CHECK(t.stores[0].method == method_id(p, "T::set"));
    CHECK(t.stores[0].instr == 2);
    CHECK(t.stores[0].candidates == std::vector<ObservedStore::Target>{direct({VarKind::arg, 0})});
  }
  SUBCASE("fields and aliases") {
    auto p = parse_program(
        ".class T\n.field f\n.method make()\n.line t:1\n  ret\n.end\n"
        ".method main()\n.locals a, b\n.line t:2\n"
        "  newobj T::make\n  dup\n  stloc a\n  stloc b\n  ldloc a\n  ldc 1\n  stfld T.f\n  ret\n.end\n.end\n");
    auto t = interpret(p, method_id(p, "T::main"), {});
    REQUIRE(t.stores.size() == 3);
    const auto& s = t.stores[2];
    FieldId f = *p.find_field(ClassId{0}, "f");
    CHECK(s.candidates == std::vector<ObservedStore::Target>{
                              {ObservedStore::Target::Kind::field, {VarKind::local, 0}, f},
                              {ObservedStore::Target::Kind::field, {VarKind::local, 1}, f}});
  }
  SUBCASE("inputs and branches") {
    auto p = parse_program(one_method(
        "  ldarg c\n  brtrue T\n  ldc 1\n  stloc x\n  ret\n  label T\n  ldc 2\n  stloc y\n  ret", "c", "x, y"));
    CHECK(interpret(p, MethodId{0}, {0}).stores.at(0).instr == 3);
    CHECK(interpret(p, MethodId{0}, {5}).stores.at(0).instr == 7);
  }
  SUBCASE("errors") {
    auto loop = parse_program(one_method("  ldc 0\n  pop\n  label H\n  br H"));
    CHECK_THROWS_AS(interpret(loop, MethodId{0}, {}, 1000), InterpreterError);
    auto bad = parse_program(".class T\n.field f\n.method m()\n.line t:1\n  ldc null\n  ldfld T.f\n  pop\n  ret\n.end\n.end\n");
    CHECK_THROWS_AS(interpret(bad, MethodId{0}, {}), InterpreterError);
  }
}

// On straight-line code the reference answer is the last store to the variable.
TEST_CASE("oracle of the oracle") {
  std::mt19937_64 g(7);
  const char* vars[] = {"a", "b", "c"};
  for (int n = 0; n < 500; ++n) {
    std::string body;
    std::vector<int> stores;  // variable stored by each line
    int k = 5 + static_cast<int>(g() % 20);
    for (int i = 0; i < k; ++i) {
      int v = static_cast<int>(g() % 3);
      body += ".line t.src:" + std::to_string(i + 1) + "\n";
      if (g() % 2) {
        body += "  ldc " + std::to_string(i) + "\n  stloc " + vars[v] + "\n";
        stores.push_back(v);
      } else {
        body += "  ldloc " + std::string(vars[v]) + "\n  pop\n";
        stores.push_back(-1 - v);
      }
    }
    body += ".line t.src:999\n  ldloc a\n  ldloc b\n  ldloc c\n  pop\n  pop\n  pop\n  ret";
    auto p = parse_program(one_method(body, "", "a, b, c"));
    for (int v = 0; v < 3; ++v) {
      auto c = reference_ud_chain(p, resolve_use_site(p, "t.src", 999, vars[v]));
      int last = -1;
      for (int i = 0; i < k; ++i) {
        if (stores[i] == v) last = i;
      }
      if (last < 0) {
        CHECK(c.definitions.empty());
      } else {
        REQUIRE(c.definitions.size() == 1);
        CHECK(c.definitions.begin()->instr == static_cast<std::uint32_t>(2 * last + 1));
      }
    }
  }
}
