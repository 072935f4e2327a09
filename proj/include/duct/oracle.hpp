// Reference answers for testing the chain engine: an exhaustive backward path
// enumerator, a random program generator and a concrete interpreter.
//
// Nothing here uses the engine, the CFG builder, the abstract stack or the
// program index. Only the MiniIL data model is shared.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "duct/chain_types.hpp"
#include "duct/mil.hpp"

namespace duct::oracle {

struct OracleBounds {
  std::uint32_t max_loop_unroll = 2;  // extra visits of an instruction per frame
  std::uint32_t max_call_depth = 6;   // nested descents plus ascents
  std::size_t max_paths = 100000;
};

class BoundsError : public std::runtime_error {
 public:
  BoundsError(std::string bound, const std::string& what)
      : std::runtime_error(what), bound_(std::move(bound)) {}
  const std::string& bound() const { return bound_; }

 private:
  std::string bound_;
};

struct ReferenceDefinition {
  MethodId method{};
  std::uint32_t instr = 0;
  DefinitionKind kind = DefinitionKind::direct_store;
  std::string note;
  auto operator<=>(const ReferenceDefinition&) const = default;
};

struct ReferenceChain {
  std::set<ReferenceDefinition> definitions;  // one per (method, instr)
  std::size_t paths = 0;                       // backward paths explored
};

// Throws BoundsError. `kill_rule` false means calls never end a path.
ReferenceChain reference_ud_chain(const Program& program, const UseSite& use,
                                  const OracleBounds& bounds = {}, bool kill_rule = true);

struct GeneratorLimits {
  std::uint32_t max_methods = 8;
  std::uint32_t max_blocks_per_method = 30;
  std::uint32_t max_locals = 6;
  std::uint32_t max_class_depth = 3;
  double byref_probability = 0.3;
  double virtual_probability = 0.3;
  std::uint64_t seed = 0;
  // Type-consistent programs that run to completion under interpret().
  bool executable = false;
};

struct GeneratedProgram {
  std::string text;  // MiniIL
  Program program;
  std::vector<UseSite> uses;  // at least one per method that reads anything
  MethodId entry{};           // executable programs: the method to run
  std::vector<std::int64_t> inputs;  // and its integer arguments
};

GeneratedProgram generate_random_program(const GeneratorLimits& limits);

// One executed store. `candidates` lists every variable of the storing frame
// that names the written location when the store executes, spelled as store
// targets: direct(v), field(v, f) or element(v).
struct ObservedStore {
  MethodId method{};
  std::uint32_t instr = 0;
  struct Target {
    enum class Kind : std::uint8_t { direct, field, element };
    Kind kind = Kind::direct;
    VarRef var{};
    FieldId field{};
    auto operator<=>(const Target&) const = default;
  };
  std::vector<Target> candidates;
};

struct Trace {
  std::vector<ObservedStore> stores;
  std::size_t steps = 0;
};

class InterpreterError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Runs `entry` with integer `inputs` for its parameters (missing ones are 0;
// byref parameters get fresh cells). binop adds integers. Throws
// InterpreterError on a stuck state or when `max_steps` is exceeded.
Trace interpret(const Program& program, MethodId entry, const std::vector<std::int64_t>& inputs,
                std::size_t max_steps = 1000000);

}  // namespace duct::oracle
