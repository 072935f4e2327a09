// Whole-program structures built once per program: the call graph (one
// syntactic sweep), the class hierarchy, and the analysis cache that the
// demand-driven queries share.

#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <vector>

#include "duct/abstract_stack.hpp"
#include "duct/chain_types.hpp"
#include "duct/flowgraph.hpp"
#include "duct/mil.hpp"

namespace duct {

struct CallEdge {
  MethodId caller{};
  std::uint32_t site = 0;
  MethodId callee{};  // statically named method
  bool is_static = true;  // false for callvirt
};

struct CallSite {
  MethodId caller{};
  std::uint32_t site = 0;
  auto operator<=>(const CallSite&) const = default;
};

struct CallGraph {
  std::vector<MethodId> nodes;
  std::vector<CallEdge> edges;  // program order
  std::size_t instructions_visited = 0;
};

CallGraph build_call_graph(const Program& program);

class ClassHierarchy {
 public:
  std::optional<ClassId> parent(ClassId c) const { return parents_.at(c.value); }
  // The virtual method `m` directly overrides, if any.
  std::optional<MethodId> overridden(MethodId m) const { return overridden_.at(m.value); }
  // Every transitive override of `m`, declaration order.
  const std::vector<MethodId>& overriders(MethodId m) const { return overriders_.at(m.value); }
  // `m` followed by its overriders. Throws std::invalid_argument if `m` is
  // not virtual.
  std::vector<MethodId> dispatch_targets(MethodId m) const;

 private:
  friend ClassHierarchy build_class_hierarchy(const Program& program);
  std::vector<std::optional<ClassId>> parents_;
  std::vector<std::optional<MethodId>> overridden_;
  std::vector<std::vector<MethodId>> overriders_;
  std::vector<bool> is_virtual_;
};

ClassHierarchy build_class_hierarchy(const Program& program);

// Targets of the call instruction: the static callee, or CHA fan-out for
// callvirt.
std::vector<MethodId> call_targets(const ClassHierarchy& hierarchy, const Instruction& call);

// Static edges to `m` plus callvirt edges naming `m` or a virtual method it
// overrides. Sorted by (caller, site).
std::vector<CallSite> callsites_of(const CallGraph& graph, const ClassHierarchy& hierarchy,
                                   MethodId m);

// How the tracked variable is bound while scanning a method.
enum class TrackMode : std::uint8_t {
  own,           // the queried method or a caller reached from it
  byref_kill,    // callee formal aliasing the tracked variable
  byref_nokill,  // callee formal aliasing part of it (a field or element)
  byval,         // callee formal holding the same object reference
};

struct ChainKey {
  enum class Kind : std::uint8_t { scan_from, callee_summary };
  Kind kind = Kind::scan_from;
  VariableId var{};
  TrackMode mode = TrackMode::own;
  std::uint32_t origin = 0;  // instruction the backward scan starts before
  bool kill_rule = true;
  auto operator<=>(const ChainKey&) const = default;
};

struct ChainValue {
  DefinitionSet defs;
  bool killed = false;  // summaries: every path defines the formal
  bool operator==(const ChainValue&) const = default;
};

// Lazily built per-method facts.
struct MethodFacts {
  Cfg cfg;
  MethodStacks stacks;
};

struct Statistics {
  std::size_t instructions_visited = 0;
  std::size_t methods_scanned = 0;
  std::size_t blocks_visited = 0;
  std::size_t cache_hits = 0;
  std::size_t cfgs_built = 0;
  std::size_t chain_entries = 0;
};

class AnalysisCache {
 public:
  std::shared_ptr<const MethodFacts> facts(const Program& program, MethodId m);
  bool has_facts(MethodId m) const;

  std::optional<ChainValue> lookup(const ChainKey& key);
  void store(const std::map<ChainKey, ChainValue>& entries);

  void record_blocks_visited(std::size_t n) { blocks_visited_ += n; }
  void record_method_scanned() { methods_scanned_ += 1; }

  std::size_t cfgs_built() const { return cfgs_built_.load(); }
  std::size_t cache_hits() const { return cache_hits_.load(); }
  std::size_t blocks_visited() const { return blocks_visited_.load(); }
  std::size_t methods_scanned() const { return methods_scanned_.load(); }
  std::size_t chain_entries() const;
  void clear();

 private:
  mutable std::mutex mu_;
  std::map<std::uint32_t, std::shared_ptr<const MethodFacts>> facts_;
  std::map<ChainKey, ChainValue> chains_;
  std::atomic<std::size_t> cfgs_built_{0};
  std::atomic<std::size_t> cache_hits_{0};
  std::atomic<std::size_t> blocks_visited_{0};
  std::atomic<std::size_t> methods_scanned_{0};
};

class ProgramIndex {
 public:
  explicit ProgramIndex(const Program& program);

  const Program& program() const { return program_; }
  const CallGraph& call_graph() const { return graph_; }
  const ClassHierarchy& hierarchy() const { return hierarchy_; }
  AnalysisCache& cache() const { return cache_; }

  const std::vector<CallSite>& callsites(MethodId m) const { return callsites_.at(m.value); }

  Statistics statistics() const;

 private:
  const Program& program_;
  CallGraph graph_;
  ClassHierarchy hierarchy_;
  std::vector<std::vector<CallSite>> callsites_;
  mutable AnalysisCache cache_;
};

}  // namespace duct
