// Helpers private to the oracle. Deliberately re-derived from the MiniIL
// definition rather than borrowed from the analysis modules.

#pragma once

#include <cstdint>
#include <vector>

#include "duct/mil.hpp"

namespace duct::oracle::detail {

struct Effect {
  int pops = 0;
  int pushes = 0;
};

// dup is modelled as pushing a copy of the top without popping it.
Effect effect(const Program& p, const MethodDef& m, const Instruction& ins);

// Whole-program facts the oracle needs, computed by direct scans.
struct Facts {
  // `k` starts a basic block.
  std::vector<std::vector<bool>> leader;
  // Instructions control can come from into a leader, ascending.
  std::vector<std::vector<std::vector<std::uint32_t>>> preds;
  // ret instructions per method.
  std::vector<std::vector<std::uint32_t>> rets;
  // callvirt fan-out: the method and everything that overrides it.
  std::vector<std::vector<MethodId>> family;
  // (caller, site) pairs that may invoke the method.
  std::vector<std::vector<std::pair<MethodId, std::uint32_t>>> sites;
};

Facts scan_program(const Program& p);

std::vector<MethodId> call_targets(const Facts& f, const Instruction& call);

// What is on the operand stack `from_top` slots below the top just before
// instruction `k`, as far as can be seen inside the block.
struct Val {
  enum class Kind : std::uint8_t {
    constant,
    value_of,
    address_of,
    field_addr,
    elem_addr,
    call_result,
    unknown,
  };
  Kind kind = Kind::unknown;
  VarRef var{};
  bool has_base = false;
  FieldId field{};
  std::int32_t origin = -1;
};

Val value_before(const Program& p, const Facts& f, MethodId m, std::uint32_t k,
                 std::uint32_t from_top);

struct Target {
  enum class Kind : std::uint8_t { direct, field, element, unknown };
  Kind kind = Kind::unknown;
  VarRef var{};
  FieldId field{};
};

Target store_target(const Program& p, const Facts& f, MethodId m, std::uint32_t k);

}  // namespace duct::oracle::detail
