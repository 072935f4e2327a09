#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <regex>
#include <sstream>

#include "duct/mil.hpp"
#include "duct/oracle.hpp"
#include "support.hpp"

using namespace duct;
using testing::one_method;

namespace {

// 1-based line of the first line of `text` containing `needle`.
std::uint32_t line_of(const std::string& text, const std::string& needle) {
  std::istringstream in(text);
  std::string line;
  for (std::uint32_t n = 1; std::getline(in, line); ++n) {
    if (line.find(needle) != std::string::npos) return n;
  }
  return 0;
}

LoadError load_error(const std::string& text) {
  try {
    parse_program(text);
  } catch (const LoadError& e) {
    return e;
  }
  FAIL("program was accepted");
  return LoadError(0, 0, "");
}

void check_rejected(const std::string& text, const std::string& fragment) {
  auto e = load_error(text);
  INFO("message: " << std::string(e.what()));
  CHECK(std::string(e.what()).find(fragment) != std::string::npos);
  CHECK(e.line() >= 1);
}

}  // namespace

TEST_CASE("minimal method loads with three instructions") {
  auto p = parse_program(one_method("  ldc 5\n  stloc a\n  ret", "", "a"));
  REQUIRE(p.classes.size() == 1);
  REQUIRE(p.methods.size() == 1);
  const auto& m = p.methods[0];
  CHECK(m.body.size() == 3);
  CHECK(m.body[1].op == Opcode::stloc);
  CHECK(m.body[1].var == VarRef{VarKind::local, 0});
  CHECK(m.line_map.size() == 3);
  CHECK(m.stack_depth == std::vector<std::int32_t>{0, 1, 0});
}

TEST_CASE("undefined label is reported at its use") {
  std::string text = one_method("  br L1\n  ret");
  auto e = load_error(text);
  CHECK(std::string(e.what()).find("undefined label 'L1'") != std::string::npos);
  CHECK(e.line() == line_of(text, "br L1"));
}

TEST_CASE("earth fixture") {
  auto p = testing::load_fixture("earth.mil");
  CHECK(p.methods.size() >= 3);
  auto jde = testing::method_id(p, "Form1::JDE_FOR");
  auto jdn = testing::method_id(p, "Form1::JD_NUM_FOR");
  testing::method_id(p, "Form1::ComputeButton_Click");
  const auto& fr = p.method(jde).params.at(2);
  CHECK(fr.name == "fracRes");
  CHECK(fr.byref);
  const auto& aj = p.method(jdn).params.at(1);
  CHECK(aj.name == "astroJDnum");
  CHECK(aj.byref);
  CHECK(p.find_source_file("earth.vb"));
}

TEST_CASE("store opcodes") {
  std::vector<Opcode> stores;
  for (int i = 0; i <= static_cast<int>(Opcode::binop); ++i) {
    if (is_store(static_cast<Opcode>(i))) stores.push_back(static_cast<Opcode>(i));
  }
  std::sort(stores.begin(), stores.end());
  std::vector<Opcode> expected{Opcode::stloc, Opcode::starg, Opcode::stfld, Opcode::stelem,
                               Opcode::stind};
  std::sort(expected.begin(), expected.end());
  CHECK(stores == expected);
  for (int i = 0; i <= static_cast<int>(Opcode::binop); ++i) {
    auto op = static_cast<Opcode>(i);
    CHECK(opcode_from_name(opcode_name(op)) == op);
  }
  CHECK_FALSE(opcode_from_name("stlocx"));
}

TEST_CASE("loader rejects invariant violations") {
  SUBCASE("unknown opcode") { check_rejected(one_method("  frob\n  ret"), "unknown opcode"); }
  SUBCASE("undefined method") {
    check_rejected(one_method("  call T::nope\n  ret"), "undefined method 'T::nope'");
  }
  SUBCASE("undefined class in call") {
    check_rejected(one_method("  call U::m\n  ret"), "undefined class 'U'");
  }
  SUBCASE("undefined field") {
    check_rejected(one_method("  ldarg p\n  ldfld T.f\n  pop\n  ret", "p"), "undefined field");
  }
  SUBCASE("undefined local") {
    check_rejected(one_method("  ldloc z\n  pop\n  ret"), "undefined local 'z'");
  }
  SUBCASE("stack underflow") { check_rejected(one_method("  pop\n  ret"), "stack underflow"); }
  SUBCASE("depth mismatch at a join") {
    check_rejected(one_method("  ldc 1\n  brtrue J\n  ldc 2\n  label J\n  ret"),
                   "stack depth mismatch");
  }
  SUBCASE("ret with a leftover value") {
    check_rejected(one_method("  ldc 1\n  ret"), "ret with stack depth 1");
  }
  SUBCASE("falls off the end") {
    check_rejected(one_method("  ldc 1\n  pop"), "falls off the end");
  }
  SUBCASE("missing line directive") {
    check_rejected(".class T\n.method m()\n  ret\n.end\n.end\n", "not covered by a .line directive");
  }
  SUBCASE("cyclic hierarchy") {
    check_rejected(".class A : B\n.end\n.class B : A\n.end\n", "cyclic class hierarchy");
  }
  SUBCASE("duplicate method") {
    check_rejected(".class T\n.method m()\n.line a:1\n  ret\n.end\n.method m()\n.line a:2\n  ret\n.end\n.end\n",
                   "duplicate method");
  }
  SUBCASE("duplicate class") {
    check_rejected(".class T\n.end\n.class T\n.end\n", "duplicate class");
  }
  SUBCASE("duplicate label") {
    check_rejected(one_method("  label A\n  label A\n  ret"), "duplicate label");
  }
  SUBCASE("local clashes with parameter") {
    check_rejected(one_method("  ret", "x", "x"), "clashes");
  }
  SUBCASE("override without a virtual ancestor") {
    check_rejected(".class T\n.method override m()\n.line a:1\n  ret\n.end\n.end\n",
                   "no matching virtual");
  }
  SUBCASE("override with another signature") {
    check_rejected(
        ".class A\n.method virtual m(x)\n.line a:1\n  ret\n.end\n.end\n"
        ".class B : A\n.method override m(ref x)\n.line a:2\n  ret\n.end\n.end\n",
        "does not match the signature");
  }
  SUBCASE("callvirt on a non-virtual method") {
    check_rejected(".class T\n.method m()\n.line a:1\n  callvirt T::m\n  ret\n.end\n.end\n",
                   "not virtual");
  }
  SUBCASE("byref formal bound to a value") {
    check_rejected(
        ".class T\n.method f(ref p)\n.line a:1\n  ret\n.end\n"
        ".method m()\n.locals x\n.line a:2\n  ldloc x\n  call T::f\n  ret\n.end\n.end\n",
        "must be bound to an address");
  }
  SUBCASE("address bound to a by-value formal") {
    check_rejected(
        ".class T\n.method f(p)\n.line a:1\n  ret\n.end\n"
        ".method m()\n.locals x\n.line a:2\n  ldloca x\n  call T::f\n  ret\n.end\n.end\n",
        "address bound to by-value parameter");
  }
  SUBCASE("byref address from another block") {
    check_rejected(
        ".class T\n.method f(ref p)\n.line a:1\n  ret\n.end\n"
        ".method m()\n.locals x\n.line a:2\n  ldloca x\n  label J\n  call T::f\n  ret\n.end\n.end\n",
        "must be bound to an address");
  }
  SUBCASE("syntax: missing parenthesis") {
    check_rejected(".class T\n.method m\n.end\n.end\n", "expected '('");
  }
}

TEST_CASE("error positions point into the text") {
  std::string text = ".class T\n.method m()\n.line a:1\n  ldc 1\n  ldloc nope\n  ret\n.end\n.end\n";
  auto e = load_error(text);
  CHECK(e.line() == 5);
  CHECK(e.column() == 9);
}

TEST_CASE("line map inherits the last directive") {
  auto p = parse_program(
      ".class T\n.method m()\n.locals a\n.line x.src:3\n  ldc 1\n  stloc a\n.line y.src:7\n  ret\n.end\n.end\n");
  const auto& lm = p.methods[0].line_map;
  REQUIRE(lm.size() == 3);
  CHECK(p.source_files[lm[0].file] == "x.src");
  CHECK(lm[1].line == 3);
  CHECK(p.source_files[lm[2].file] == "y.src");
  CHECK(lm[2].line == 7);
}

TEST_CASE("round trip is a fixed point") {
  std::vector<std::string> texts;
  for (const char* f : {"earth.mil", "kill.mil", "loop.mil", "mutual.mil", "selfrec.mil"}) {
    texts.push_back(testing::fixture_text(f));
  }
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    oracle::GeneratorLimits l;
    l.seed = seed;
    l.executable = seed % 2 == 1;
    texts.push_back(oracle::generate_random_program(l).text);
  }
  for (const auto& t : texts) {
    auto p = parse_program(t);
    auto printed = print_program(p);
    auto q = parse_program(printed);
    CHECK(structurally_equal(p, q));
    CHECK(print_program(q) == printed);
  }
}

TEST_CASE("structural equality notices differences") {
  auto a = parse_program(one_method("  ldc 5\n  stloc a\n  ret", "", "a"));
  auto b = parse_program(one_method("  ldc 6\n  stloc a\n  ret", "", "a"));
  CHECK_FALSE(structurally_equal(a, b));
  CHECK(structurally_equal(a, a));
}

// Text mutations that each break one loader invariant.
namespace {

std::vector<std::string> mutations(const std::string& text) {
  std::vector<std::string> out;
  std::smatch m;
  // A branch target's label goes missing.
  if (std::regex_search(text, m, std::regex(R"(\n  (?:br|brtrue|brfalse) (\w+)\n)"))) {
    std::string l = "\n  label " + m[1].str() + "\n";
    auto at = text.find(l);
    if (at != std::string::npos) out.push_back(text.substr(0, at) + text.substr(at + l.size() - 1));
  }
  // A callee is renamed.
  if (std::regex_search(text, m, std::regex(R"(\n  (call|callvirt|newobj) (\w+)::(\w+)\n)"))) {
    auto at = static_cast<std::size_t>(m.position(0)) + m.length(0) - 1;
    out.push_back(text.substr(0, at) + "_gone" + text.substr(at));
  }
  // A field reference is renamed.
  if (std::regex_search(text, m, std::regex(R"(\n  (ldfld|stfld|ldflda) (\w+)\.(\w+)\n)"))) {
    auto at = static_cast<std::size_t>(m.position(0)) + m.length(0) - 1;
    out.push_back(text.substr(0, at) + "_gone" + text.substr(at));
  }
  // The first method starts by popping an empty stack.
  {
    auto at = text.find("\n.line ");
    if (at != std::string::npos) {
      auto eol = text.find('\n', at + 1);
      out.push_back(text.substr(0, eol + 1) + "  pop\n" + text.substr(eol + 1));
    }
  }
  // The first method loses every .line directive.
  {
    auto start = text.find("\n.method ");
    auto end = text.find("\n.end", start);
    if (start != std::string::npos && end != std::string::npos) {
      std::string body = text.substr(start, end - start);
      body = std::regex_replace(body, std::regex(R"(\n\.line [^\n]*)"), "");
      out.push_back(text.substr(0, start) + body + text.substr(end));
    }
  }
  // Two classes inherit from each other.
  out.push_back(text + "\n.class Zz1 : Zz2\n.end\n.class Zz2 : Zz1\n.end\n");
  // An opcode is misspelled.
  if (auto at = text.find("\n  ret\n"); at != std::string::npos) {
    out.push_back(text.substr(0, at) + "\n  rett\n" + text.substr(at + 7));
  }
  // An address bound to a byref formal becomes a value.
  auto p = parse_program(text);
  for (const auto& md : p.methods) {
    for (std::size_t k = 1; k < md.body.size(); ++k) {
      const auto& ins = md.body[k];
      if (ins.op != Opcode::call || md.body[k - 1].op != Opcode::ldloca) continue;
      const auto& callee = p.method(ins.method);
      if (callee.params.empty() || !callee.params.back().byref) continue;
      std::string at = "\n  ldloca " + md.body[k - 1].operand + "\n  call " + ins.operand + "\n";
      auto pos = text.find(at);
      if (pos == std::string::npos) continue;
      out.push_back(text.substr(0, pos) + "\n  ldloc " + md.body[k - 1].operand + "\n  call " +
                    ins.operand + "\n" + text.substr(pos + at.size()));
      return out;
    }
  }
  return out;
}

}  // namespace

TEST_CASE("every mutated fixture is rejected") {
  std::vector<std::string> texts;
  for (const char* f : {"earth.mil", "kill.mil", "loop.mil", "mutual.mil", "selfrec.mil"}) {
    texts.push_back(testing::fixture_text(f));
  }
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    oracle::GeneratorLimits l;
    l.seed = seed;
    texts.push_back(oracle::generate_random_program(l).text);
  }
  std::size_t total = 0;
  std::size_t rejected = 0;
  for (const auto& t : texts) {
    for (const auto& mutant : mutations(t)) {
      ++total;
      try {
        parse_program(mutant);
        MESSAGE("accepted mutant:\n" << mutant);
      } catch (const LoadError&) {
        ++rejected;
      }
    }
  }
  CHECK(total > 600);
  CHECK(rejected == total);
}

TEST_CASE("resolve_use_site on earth") {
  auto p = testing::load_fixture("earth.mil");
  auto jde = testing::method_id(p, "Form1::JDE_FOR");

  SUBCASE("W on the fracRes line is the ldloc feeding the add") {
    auto u = resolve_use_site(p, "earth.vb", 34, "W");
    CHECK(u.method == jde);
    const auto& ins = p.method(jde).body.at(u.instr);
    CHECK(ins.op == Opcode::ldloc);
    CHECK(p.var_name(jde, ins.var) == "W");
    CHECK(p.method(jde).body.at(u.instr + 2).op == Opcode::binop);
    CHECK(u.variable.selector.kind == Selector::Kind::none);
  }
  SUBCASE("unknown name") {
    try {
      resolve_use_site(p, "earth.vb", 34, "Zz");
      FAIL("resolved");
    } catch (const ResolveError& e) {
      CHECK(e.reason() == ResolveError::Reason::not_in_scope);
      CHECK(reason_code(e.reason()) == "not_in_scope");
    }
  }
  SUBCASE("written but not read on the line") {
    // Independent check of the fixture: on line 44 Q is only stored.
    auto jdn = testing::method_id(p, "Form1::JD_NUM_FOR");
    const auto& m = p.method(jdn);
    bool stored = false;
    bool read = false;
    for (std::uint32_t k = 0; k < m.body.size(); ++k) {
      if (m.line_map[k].line != 44) continue;
      if (m.body[k].operand != "Q") continue;
      stored |= m.body[k].op == Opcode::stloc;
      read |= m.body[k].op == Opcode::ldloc || m.body[k].op == Opcode::ldloca;
    }
    REQUIRE(stored);
    REQUIRE_FALSE(read);
    try {
      resolve_use_site(p, "earth.vb", 44, "Q");
      FAIL("resolved");
    } catch (const ResolveError& e) {
      CHECK(e.reason() == ResolveError::Reason::never_read);
    }
  }
  SUBCASE("line outside every method") {
    try {
      resolve_use_site(p, "earth.vb", 1, "Q");
      FAIL("resolved");
    } catch (const ResolveError& e) {
      CHECK(e.reason() == ResolveError::Reason::no_method);
    }
  }
  SUBCASE("last read wins and occurrence overrides") {
    // Line 31 reads Q three times.
    auto reads = reads_on_line(p, "earth.vb", 31, "Q");
    REQUIRE(reads.size() == 3);
    CHECK(resolve_use_site(p, "earth.vb", 31, "Q").instr == reads.back().instr);
    CHECK(resolve_use_site(p, "earth.vb", 31, "Q", 0).instr == reads.front().instr);
    try {
      resolve_use_site(p, "earth.vb", 31, "Q", 3);
      FAIL("resolved");
    } catch (const ResolveError& e) {
      CHECK(e.reason() == ResolveError::Reason::bad_occurrence);
    }
  }
}

TEST_CASE("selectors resolve through the stack") {
  auto p = parse_program(
      ".class T\n.field f\n.method m(o, a)\n.locals x\n.line t:1\n"
      "  ldarg o\n  ldfld T.f\n  ldarg a\n  ldc 0\n  ldelem\n  binop\n  stloc x\n  ret\n.end\n.end\n");
  auto u = resolve_use_site(p, "t", 1, "o.f");
  CHECK(u.instr == 1);
  CHECK(u.variable.selector == Selector::of_field(*p.find_field(ClassId{0}, "f")));
  CHECK(p.describe(u.variable) == "o.f");
  auto e = resolve_use_site(p, "t", 1, "a[]");
  CHECK(e.instr == 4);
  CHECK(e.variable.selector == Selector::element());
  CHECK(p.describe(e.variable) == "a[]");
  CHECK_THROWS_AS(resolve_use_site(p, "t", 1, "a.f"), ResolveError);
}

TEST_CASE("resolution does not depend on declaration order") {
  std::string a =
      ".class A\n.method f(x)\n.line s:1\n  ldarg x\n  pop\n  ret\n.end\n.end\n";
  std::string b =
      ".class B\n.method g(x)\n.line s:5\n  ldarg x\n  pop\n  ret\n.end\n.end\n";
  auto p1 = parse_program(a + b);
  auto p2 = parse_program(b + a);
  auto u1 = resolve_use_site(p1, "s", 5, "x");
  auto u2 = resolve_use_site(p2, "s", 5, "x");
  CHECK(p1.method_name(u1.method) == p2.method_name(u2.method));
  CHECK(u1.instr == u2.instr);
}

TEST_CASE("variables read on a line come from the IL") {
  auto p = testing::load_fixture("earth.mil");
  auto names = variables_read_on_line(p, *p.find_source_file("earth.vb"), 34);
  CHECK(names == std::vector<std::string>{"Q", "W"});
}
