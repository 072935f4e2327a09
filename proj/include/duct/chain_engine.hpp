// Demand-driven use-define chain construction.
//
// A query walks the CFG backwards from the use for the last definition on
// every path. Calls that receive the tracked variable by reference (or the
// object it holds) are searched from their exits; a call stops the walk only
// when every path through every dispatch target defines the formal. Reaching
// the entry of a method while tracking a parameter continues at each call
// site of that method.
//
// Work is split into memoized problems (ChainKey): "scan backwards from this
// instruction" and "summarize this callee for this formal". Recursive
// programs make problems depend on themselves; those are solved by iterating
// from the optimistic value (no definitions, killed) until nothing changes,
// which gives the same answer whatever order problems are first met in.

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "duct/chain_types.hpp"
#include "duct/program_index.hpp"

namespace duct {

struct EngineOptions {
  std::size_t budget = 100000;  // visited states per query
  bool kill_rule = true;        // false: calls never stop the backward walk
};

struct Definition {
  MethodId method{};
  std::uint32_t instr = 0;
  SourceLoc source{};
  DefinitionKind kind = DefinitionKind::direct_store;
  std::string note;
};

struct UDChain {
  UseSite query{};
  std::vector<Definition> definitions;  // sorted by (method name, instr)
  bool truncated = false;
  std::size_t states_visited = 0;
};

struct ScanResult {
  DefinitionSet defs;
  bool killed = false;
};

// The variable being tracked while scanning one method.
struct Tracked {
  VariableId var{};
  TrackMode mode = TrackMode::own;
  std::string note;  // attached to definitions found in this method
};

// One query's traversal. Holds the visited bookkeeping and the per-query
// problem table; results are committed to the shared cache on success.
class ChainSearch {
 public:
  ChainSearch(const ProgramIndex& index, EngineOptions options);

  UDChain run(const UseSite& use);

  // Walks [block.start, from) in reverse.
  ScanResult scan_block_backward(const Tracked& t, BlockId block, std::uint32_t from);
  ScanResult process_call_site(const Tracked& t, std::uint32_t site);
  // `t` tracks a parameter whose scan reached the method entry.
  DefinitionSet continue_at_callsites(const Tracked& t);

  std::size_t states_visited() const { return states_; }

 private:
  struct Entry {
    ChainValue value;
    std::size_t round = 0;
    bool in_progress = false;
  };

  ChainValue solve(const ChainKey& key);
  ChainValue compute(const ChainKey& key);
  const MethodFacts& facts(MethodId m);
  void count_state();
  void report(DefinitionSet& out, MethodId method, std::uint32_t instr, DefinitionInfo info);

  const ProgramIndex& index_;
  const Program& program_;
  EngineOptions options_;
  std::map<ChainKey, Entry> table_;
  std::map<std::uint32_t, std::shared_ptr<const MethodFacts>> facts_;
  DefinitionSet seen_;  // everything reported, for truncated answers
  std::size_t round_ = 0;
  std::size_t depth_ = 0;
  std::size_t states_ = 0;
  bool cycle_ = false;
  bool changed_ = false;
  bool truncated_ = false;
};

UDChain compute_ud_chain(const ProgramIndex& index, const UseSite& use,
                         const EngineOptions& options = {});

// Forward must-define dataflow: true iff every entry-to-exit path passes an
// instruction for which `defines` holds. Vacuously true without exits.
bool all_paths_define(const Cfg& cfg, const std::function<bool(std::uint32_t)>& defines);

// Exact, killing definitions of a formal in its own method (direct stores).
std::function<bool(std::uint32_t)> direct_definition_of(const Program& program,
                                                        const MethodFacts& facts, VarRef formal);

// JSON text of a chain, fields in fixed order. `indent` < 0 gives one line.
std::string chain_to_json(const Program& program, const UDChain& chain, int indent = 2);

}  // namespace duct
