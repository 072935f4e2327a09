// Symbolic execution of the operand stack inside one basic block. Used to find
// which variable a store writes, in particular for stind.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "duct/flowgraph.hpp"
#include "duct/mil.hpp"

namespace duct {

inline constexpr std::int32_t kNoOrigin = -1;

struct AbstractValue {
  enum class Tag : std::uint8_t {
    constant,
    value_of,    // var
    address_of,  // var
    field_addr,  // base var (if has_base), field
    elem_addr,   // base var (if has_base)
    call_result,
    unknown,
  };
  Tag tag = Tag::unknown;
  VarRef var{};
  bool has_base = false;  // field_addr/elem_addr: base was value_of(var)
  FieldId field{};
  // Instruction that pushed the value; kNoOrigin for block-entry values.
  std::int32_t origin = kNoOrigin;

  static AbstractValue unknown(std::int32_t origin = kNoOrigin) { return {Tag::unknown, {}, false, {}, origin}; }

  bool operator==(const AbstractValue&) const = default;
};

using StackState = std::vector<AbstractValue>;  // bottom first

struct BlockSimulation {
  std::vector<StackState> before;  // one per instruction in the block
  StackState exit;
};

// Pure transfer over [block.start, block.end).
BlockSimulation simulate_block(const Program& program, MethodId method, const BasicBlock& block,
                               const StackState& entry_stack);

// All-unknown stack of the verified depth at the block's first instruction.
StackState block_entry_stack(const Program& program, MethodId method, const BasicBlock& block);

struct StoreTarget {
  enum class Kind : std::uint8_t { direct, field, element, unknown };
  Kind kind = Kind::unknown;
  VarRef var{};
  FieldId field{};

  bool operator==(const StoreTarget& o) const {
    if (kind != o.kind) return false;
    if (kind == Kind::unknown) return true;
    if (var != o.var) return false;
    return kind != Kind::field || field == o.field;
  }
};

// Classifies a store given the stack state just before it.
StoreTarget classify_store(const Instruction& ins, const StackState& before);

// Throws std::invalid_argument if the instruction is not a store opcode.
StoreTarget resolve_store_target(const Program& program, const Cfg& cfg, std::uint32_t instr);

// Per-method precomputation: the stack before every instruction and every
// store's target.
struct MethodStacks {
  std::vector<StackState> before;
  std::vector<StoreTarget> store_targets;  // unknown for non-stores
};

MethodStacks simulate_method(const Program& program, const Cfg& cfg);

std::string describe(const Program& program, MethodId method, const AbstractValue& v);
std::string describe(const Program& program, MethodId method, const StoreTarget& t);

}  // namespace duct
