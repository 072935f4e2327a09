// Shared helpers for the test binaries.

#pragma once

#include <string>
#include <string_view>

#include "duct/frontdoor.hpp"
#include "duct/mil.hpp"

namespace testing {

inline std::string fixture_path(const std::string& name) {
  return std::string(DUCT_FIXTURE_DIR) + "/" + name;
}

inline std::string fixture_text(const std::string& name) {
  return duct::read_file(fixture_path(name));
}

inline duct::Program load_fixture(const std::string& name) {
  return duct::parse_program(fixture_text(name));
}

// One class T with one method m. `body` may carry its own .line directives;
// a `.line t.src:1` is put in front of it.
inline std::string one_method(std::string_view body, std::string_view params = "",
                              std::string_view locals = "", bool returns = false) {
  std::string s = ".class T\n.method m(" + std::string(params) + ")";
  if (returns) s += " returns";
  s += "\n";
  if (!locals.empty()) s += ".locals " + std::string(locals) + "\n";
  s += ".line t.src:1\n" + std::string(body) + "\n.end\n.end\n";
  return s;
}

inline duct::MethodId method_id(const duct::Program& p, std::string_view name) {
  auto m = p.find_method(name);
  if (!m) throw std::runtime_error("no method " + std::string(name));
  return *m;
}

}  // namespace testing
