#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "duct/chain_engine.hpp"
#include "duct/oracle.hpp"
#include "support.hpp"

using namespace duct;
using testing::method_id;
using testing::one_method;

namespace {

// "Class::method:instr kind note", in the chain's order.
std::vector<std::string> render(const Program& p, const UDChain& c) {
  std::vector<std::string> out;
  for (const auto& d : c.definitions) {
    std::string s = p.method_name(d.method) + ":" + std::to_string(d.instr) + " " +
                    std::string(kind_name(d.kind));
    if (!d.note.empty()) s += " " + d.note;
    out.push_back(s);
  }
  return out;
}

std::vector<std::string> render(const Program& p, const DefinitionSet& s) {
  std::vector<std::string> out;
  for (const auto& [site, info] : s.entries()) {
    std::string r = p.method_name(site.method) + ":" + std::to_string(site.instr) + " " +
                    std::string(kind_name(info.kind));
    if (!info.note.empty()) r += " " + info.note;
    out.push_back(r);
  }
  return out;
}

UDChain query(const ProgramIndex& ix, const std::string& file, std::uint32_t line,
              const std::string& var, EngineOptions o = {}) {
  return compute_ud_chain(ix, resolve_use_site(ix.program(), file, line, var), o);
}

std::set<std::pair<std::uint32_t, std::uint32_t>> sites_of(const UDChain& c) {
  std::set<std::pair<std::uint32_t, std::uint32_t>> out;
  for (const auto& d : c.definitions) out.emplace(d.method.value, d.instr);
  return out;
}

std::set<std::pair<std::uint32_t, std::uint32_t>> sites_of(const oracle::ReferenceChain& c) {
  std::set<std::pair<std::uint32_t, std::uint32_t>> out;
  for (const auto& d : c.definitions) out.emplace(d.method.value, d.instr);
  return out;
}

Tracked own(MethodId m, VarRef v, Selector s = {}) { return {VariableId{m, v, s}, TrackMode::own, ""}; }

VarRef local(std::uint32_t i) { return {VarKind::local, i}; }
VarRef arg(std::uint32_t i) { return {VarKind::arg, i}; }

}  // namespace

TEST_CASE("earth: W reaches the store in JD_NUM_FOR") {
  auto p = testing::load_fixture("earth.mil");
  ProgramIndex ix(p);
  auto c = query(ix, "earth.vb", 34, "W");
  CHECK_FALSE(c.truncated);
  REQUIRE(c.definitions.size() == 1);
  const auto& d = c.definitions[0];
  CHECK(p.method_name(d.method) == "Form1::JD_NUM_FOR");
  CHECK(d.instr == 112);
  CHECK(d.source.line == 62);
  CHECK(d.kind == DefinitionKind::byref_callee_store);
  CHECK(d.note == "via call Form1::JD_NUM_FOR → byref astroJDnum");
  // The store is `astroJDnum = JD - 0.5`: starg of the formal after a binop.
  const auto& body = p.method(d.method).body;
  CHECK(body[d.instr].op == Opcode::starg);
  CHECK(p.var_name(d.method, body[d.instr].var) == "astroJDnum");
  CHECK(body[d.instr - 1].op == Opcode::binop);
  CHECK(body[d.instr - 2].operand == "0.5");
}

TEST_CASE("earth: Q in EARTH_LBR_FOR reaches fracRes = W + Q") {
  auto p = testing::load_fixture("earth.mil");
  ProgramIndex ix(p);
  auto c = query(ix, "earth.vb", 68, "Q");
  CHECK(render(p, c) ==
        std::vector<std::string>{"Form1::JDE_FOR:36 byref-callee-store via call Form1::JDE_FOR → byref fracRes"});
  CHECK(c.definitions[0].source.line == 34);
  CHECK(p.var_name(c.definitions[0].method, p.method(c.definitions[0].method).body[36].var) == "fracRes");
}

TEST_CASE("diamond and same-block") {
  auto diamond = parse_program(one_method(
      "  ldarg c\n  brtrue T\n  ldc 1\n  stloc x\n  br J\n  label T\n  ldc 2\n  stloc x\n"
      "  label J\n.line t.src:2\n  ldloc x\n  pop\n  ret",
      "c", "x"));
  ProgramIndex dx(diamond);
  CHECK(render(diamond, query(dx, "t.src", 2, "x")) ==
        std::vector<std::string>{"T::m:3 direct-store", "T::m:7 direct-store"});

  auto same = parse_program(one_method(
      "  ldc 1\n  stloc x\n  label L\n  ldc 2\n  stloc x\n.line t.src:2\n  ldloc x\n  pop\n  ret", "", "x"));
  ProgramIndex sx(same);
  CHECK(render(same, query(sx, "t.src", 2, "x")) == std::vector<std::string>{"T::m:4 direct-store"});
}

TEST_CASE("scan_block_backward") {
  SUBCASE("in-block definition kills") {
    auto p = parse_program(one_method("  ldc 1\n  stloc x\n  ldloc x\n  pop\n  ret", "", "x"));
    ProgramIndex ix(p);
    ChainSearch s(ix, {});
    auto r = s.scan_block_backward(own(MethodId{0}, local(0)), 0, 2);
    CHECK(r.killed);
    CHECK(render(p, r.defs) == std::vector<std::string>{"T::m:1 direct-store"});
  }
  SUBCASE("element store is reported and the scan goes on") {
    auto p = parse_program(
        one_method("  ldarg a\n  ldc 0\n  ldc 1\n  stelem\n  ldarg a\n  pop\n  ret", "a"));
    ProgramIndex ix(p);
    ChainSearch s(ix, {});
    auto r = s.scan_block_backward(own(MethodId{0}, arg(0)), 0, 4);
    CHECK_FALSE(r.killed);
    CHECK(render(p, r.defs) == std::vector<std::string>{"T::m:3 element-store"});
  }
  SUBCASE("entry block without a definition") {
    auto p = parse_program(one_method("  ldloc x\n  pop\n  ret", "", "x"));
    ProgramIndex ix(p);
    ChainSearch s(ix, {});
    auto r = s.scan_block_backward(own(MethodId{0}, local(0)), 0, 0);
    CHECK_FALSE(r.killed);
    CHECK(r.defs.empty());
    auto c = compute_ud_chain(ix, resolve_use_site(p, "t.src", 1, "x"));
    CHECK(c.definitions.empty());
    CHECK_FALSE(c.truncated);
  }
  SUBCASE("field store on the queried field kills, on the whole object it does not") {
    auto p = parse_program(
        ".class T\n.field f\n.method m(o)\n.line t:1\n"
        "  ldarg o\n  ldc 1\n  stfld T.f\n  ldarg o\n  ldfld T.f\n  pop\n  ret\n.end\n.end\n");
    ProgramIndex ix(p);
    ChainSearch s(ix, {});
    auto f = *p.find_field(ClassId{0}, "f");
    auto exact = s.scan_block_backward(own(MethodId{0}, arg(0), Selector::of_field(f)), 0, 3);
    CHECK(exact.killed);
    CHECK(render(p, exact.defs) == std::vector<std::string>{"T::m:2 field-store"});
    auto whole = s.scan_block_backward(own(MethodId{0}, arg(0)), 0, 3);
    CHECK_FALSE(whole.killed);
    CHECK(render(p, whole.defs) == std::vector<std::string>{"T::m:2 field-store"});
  }
  SUBCASE("unknown address is reported without killing") {
    auto p = parse_program(one_method("  ldloca x\n  label B\n  ldc 1\n  stind\n  ldloc x\n  pop\n  ret", "", "x"));
    ProgramIndex ix(p);
    ChainSearch s(ix, {});
    auto r = s.scan_block_backward(own(MethodId{0}, local(0)), 1, 4);
    CHECK_FALSE(r.killed);
    CHECK(render(p, r.defs) == std::vector<std::string>{"T::m:3 unknown-address"});
  }
}

TEST_CASE("process_call_site kill rule") {
  auto p = testing::load_fixture("kill.mil");
  ProgramIndex ix(p);
  auto x = local(0);
  SUBCASE("callee defines the formal on every path") {
    ChainSearch s(ix, {});
    auto r = s.process_call_site(own(method_id(p, "Base::FullCaller"), x), 3);
    CHECK(r.killed);
    CHECK(render(p, r.defs) ==
          std::vector<std::string>{"Base::Full:1 byref-callee-store via call Base::Full → byref p"});
  }
  SUBCASE("callee defines it in one branch") {
    ChainSearch s(ix, {});
    auto r = s.process_call_site(own(method_id(p, "Base::PartialCaller"), x), 4);
    CHECK_FALSE(r.killed);
    CHECK(render(p, r.defs) ==
          std::vector<std::string>{"Base::Partial:3 byref-callee-store via call Base::Partial → byref p"});
  }
  SUBCASE("one dispatch target defines it, the other does not") {
    ChainSearch s(ix, {});
    auto r = s.process_call_site(own(method_id(p, "Base::VirtualCaller"), x), 3);
    CHECK_FALSE(r.killed);
    CHECK(render(p, r.defs) ==
          std::vector<std::string>{"Base::Set:2 byref-callee-store via call Base::Set → byref p"});
  }
  SUBCASE("the variable does not escape") {
    ChainSearch s(ix, {});
    auto r = s.process_call_site(own(method_id(p, "Base::PartialCaller"), arg(0)), 4);
    CHECK_FALSE(r.killed);
    CHECK(r.defs.empty());
  }
  SUBCASE("whole queries") {
    CHECK(render(p, query(ix, "kill.src", 12, "x")) ==
          std::vector<std::string>{"Base::Full:1 byref-callee-store via call Base::Full → byref p"});
    CHECK(render(p, query(ix, "kill.src", 22, "x")) ==
          std::vector<std::string>{"Base::Partial:3 byref-callee-store via call Base::Partial → byref p",
                                   "Base::PartialCaller:1 direct-store"});
    CHECK(render(p, query(ix, "kill.src", 32, "x")) ==
          std::vector<std::string>{"Base::Set:2 byref-callee-store via call Base::Set → byref p",
                                   "Base::VirtualCaller:1 direct-store"});
    // Without the kill rule the full-path call no longer hides x = 0.
    EngineOptions nokill;
    nokill.kill_rule = false;
    CHECK(render(p, query(ix, "kill.src", 12, "x", nokill)) ==
          std::vector<std::string>{"Base::Full:1 byref-callee-store via call Base::Full → byref p",
                                   "Base::FullCaller:1 direct-store"});
  }
}

TEST_CASE("object arguments") {
  auto p = parse_program(
      ".class T\n.field f\n"
      ".method set(o)\n.line t:1\n  ldarg o\n  ldc 1\n  stfld T.f\n  ret\n.end\n"
      ".method main(o)\n.line t:2\n  ldarg o\n  ldc 0\n  stfld T.f\n  ldarg o\n  call T::set\n"
      ".line t:3\n  ldarg o\n  ldfld T.f\n  pop\n  ret\n.end\n.end\n");
  ProgramIndex ix(p);
  auto use = resolve_use_site(p, "t", 3, "o.f");
  // The callee's field store is reported but never kills.
  CHECK(render(p, compute_ud_chain(ix, use)) ==
        std::vector<std::string>{"T::main:2 field-store", "T::set:2 field-store via call T::set → object o"});
}

TEST_CASE("continue_at_callsites") {
  SUBCASE("earth: Q continues in the caller") {
    auto p = testing::load_fixture("earth.mil");
    ProgramIndex ix(p);
    ChainSearch s(ix, {});
    auto m = method_id(p, "Form1::EARTH_LBR_FOR");
    auto defs = s.continue_at_callsites(own(m, arg(0)));
    CHECK(render(p, defs) ==
          std::vector<std::string>{"Form1::JDE_FOR:36 byref-callee-store via call Form1::JDE_FOR → byref fracRes"});
  }
  SUBCASE("uncalled method") {
    auto p = parse_program(one_method("  ldarg p\n  pop\n  ret", "p"));
    ProgramIndex ix(p);
    ChainSearch s(ix, {});
    CHECK(s.continue_at_callsites(own(MethodId{0}, arg(0))).empty());
  }
  SUBCASE("constant actual") {
    auto p = parse_program(
        ".class T\n.method g(p)\n.line t:1\n  ldarg p\n  pop\n  ret\n.end\n"
        ".method main()\n.line t:2\n  ldc 5\n  call T::g\n  ret\n.end\n.end\n");
    ProgramIndex ix(p);
    ChainSearch s(ix, {});
    CHECK(render(p, s.continue_at_callsites(own(MethodId{0}, arg(0)))) ==
          std::vector<std::string>{"T::main:0 direct-store argument at call site"});
    CHECK(render(p, query(ix, "t", 1, "p")) ==
          std::vector<std::string>{"T::main:0 direct-store argument at call site"});
  }
}

TEST_CASE("all_paths_define") {
  auto check = [](const std::string& body, const std::string& params, bool expected) {
    auto p = parse_program(one_method(body, params));
    ProgramIndex ix(p);
    auto f = ix.cache().facts(p, MethodId{0});
    CHECK(all_paths_define(f->cfg, direct_definition_of(p, *f, arg(0))) == expected);
  };
  check("  ldarga p\n  ldc 1\n  stind\n  ret", "ref p", true);
  check("  ldarg c\n  brtrue T\n  ldc 1\n  starg p\n  label T\n  ret", "ref p, c", false);
  check("  ldarg c\n  brtrue T\n  ldc 1\n  starg p\n  br J\n  label T\n  ldc 2\n  starg p\n  label J\n  ret",
        "ref p, c", true);
  // Loop body defines it but a zero-trip path skips the body.
  check("  ldc 0\n  pop\n  label H\n  ldarg c\n  brfalse X\n  ldc 1\n  starg p\n  br H\n  label X\n  ret", "ref p, c", false);
  check("  ldc 1\n  starg c\n  ret", "ref p, c", false);
}

TEST_CASE("termination fixtures") {
  struct Case {
    const char* file;
    const char* src;
    std::uint32_t line;
    const char* var;
    std::vector<std::string> expected;
    std::size_t states;
  };
  std::vector<Case> cases = {
      {"loop.mil", "loop.src", 6, "s", {"Loop::Run:1 direct-store", "Loop::Run:10 direct-store"}, 4},
      {"mutual.mil", "mutual.src", 2, "r",
       {"Parity::Even:10 byref-callee-store via call Parity::Even → byref x",
        "Parity::Odd:12 byref-callee-store via call Parity::Odd → byref x"},
       15},
      {"selfrec.mil", "selfrec.src", 3, "total",
       {"Rec::Count:7 byref-callee-store via call Rec::Count → byref acc", "Rec::Main:1 direct-store"},
       12},
  };
  for (const auto& c : cases) {
    INFO(std::string(c.file));
    auto p = testing::load_fixture(c.file);
    ProgramIndex ix(p);
    auto use = resolve_use_site(p, c.src, c.line, c.var);
    auto r = compute_ud_chain(ix, use);
    CHECK_FALSE(r.truncated);
    CHECK(render(p, r) == c.expected);
    CHECK(r.states_visited == c.states);
    if (std::string(c.file) == "loop.mil") {
      CHECK(sites_of(r) == sites_of(oracle::reference_ud_chain(p, use)));
    } else {
      // Recursion is beyond any finite inlining; the oracle refuses.
      try {
        oracle::reference_ud_chain(p, use);
        FAIL("oracle answered a recursive program");
      } catch (const oracle::BoundsError& e) {
        CHECK(e.bound() == "max_call_depth");
      }
    }
  }
  auto p = testing::load_fixture("selfrec.mil");
  ProgramIndex ix(p);
  CHECK(render(p, query(ix, "selfrec.src", 12, "acc")) ==
        std::vector<std::string>{"Rec::Count:7 direct-store", "Rec::Main:1 direct-store"});
}

TEST_CASE("budget") {
  auto p = testing::load_fixture("earth.mil");
  ProgramIndex ix(p);
  EngineOptions tiny;
  tiny.budget = 1;
  auto c = query(ix, "earth.vb", 34, "W", tiny);
  CHECK(c.truncated);
  // Nothing from a truncated query is cached.
  CHECK(ix.cache().chain_entries() == 0);
  auto full = query(ix, "earth.vb", 34, "W");
  CHECK_FALSE(full.truncated);
  CHECK(full.definitions.size() == 1);
}

TEST_CASE("only methods on scanned paths get a CFG") {
  auto p = testing::load_fixture("kill.mil");
  {
    ProgramIndex ix(p);
    query(ix, "kill.src", 12, "x");
    CHECK(ix.cache().cfgs_built() == 2);
    CHECK(ix.cache().has_facts(method_id(p, "Base::Full")));
    CHECK_FALSE(ix.cache().has_facts(method_id(p, "Base::Partial")));
    CHECK_FALSE(ix.cache().has_facts(method_id(p, "Base::Set")));
  }
  auto l = testing::load_fixture("loop.mil");
  ProgramIndex lx(l);
  query(lx, "loop.src", 6, "s");
  CHECK(lx.cache().cfgs_built() == 1);
  auto e = testing::load_fixture("earth.mil");
  ProgramIndex ex(e);
  query(ex, "earth.vb", 34, "W");
  CHECK(ex.cache().cfgs_built() == 2);
  CHECK_FALSE(ex.cache().has_facts(method_id(e, "Form1::ComputeButton_Click")));
}

TEST_CASE("JSON shape") {
  auto p = testing::load_fixture("earth.mil");
  ProgramIndex ix(p);
  auto json = chain_to_json(p, query(ix, "earth.vb", 34, "W"), -1);
  CHECK(json ==
        R"({"query":{"file":"earth.vb","line":34,"variable":"W","method":"Form1::JDE_FOR","instr":)" +
            std::to_string(resolve_use_site(p, "earth.vb", 34, "W").instr) +
            R"(},"definitions":[{"method":"Form1::JD_NUM_FOR","file":"earth.vb","line":62,"instr":112,)"
            R"("kind":"byref-callee-store","note":"via call Form1::JD_NUM_FOR → byref astroJDnum"}],)"
            R"("truncated":false})");
}

TEST_CASE("random programs: conservatism, determinism, cache transparency") {
  std::size_t queries = 0, grew = 0;
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    oracle::GeneratorLimits l;
    l.seed = seed;
    auto gen = oracle::generate_random_program(l);
    const auto& p = gen.program;
    ProgramIndex warm(p);
    EngineOptions nokill;
    nokill.kill_rule = false;
    for (const auto& u : gen.uses) {
      ++queries;
      auto a = compute_ud_chain(warm, u);
      auto b = compute_ud_chain(warm, u);
      ProgramIndex cold(p);
      auto c = compute_ud_chain(cold, u);
      CHECK(chain_to_json(p, a) == chain_to_json(p, b));
      CHECK(chain_to_json(p, a) == chain_to_json(p, c));
      auto wide = compute_ud_chain(cold, u, nokill);
      auto sa = sites_of(a), sw = sites_of(wide);
      CHECK(std::includes(sw.begin(), sw.end(), sa.begin(), sa.end()));
      if (sw.size() > sa.size()) ++grew;
    }
  }
  CHECK(queries > 2000);
  MESSAGE("queries " << queries << ", answers that grow without the kill rule " << grew);
  CHECK(grew > 0);
}
