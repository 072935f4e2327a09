#include "duct/program_index.hpp"

#include <algorithm>
#include <stdexcept>

namespace duct {

CallGraph build_call_graph(const Program& program) {
  CallGraph g;
  g.nodes.reserve(program.methods.size());
  for (std::uint32_t i = 0; i < program.methods.size(); ++i) {
    g.nodes.push_back(MethodId{i});
    const auto& body = program.methods[i].body;
    for (std::uint32_t k = 0; k < body.size(); ++k) {
      ++g.instructions_visited;
      const auto& ins = body[k];
      if (!is_call(ins.op)) continue;
      g.edges.push_back(CallEdge{MethodId{i}, k, ins.method, ins.op != Opcode::callvirt});
    }
  }
  return g;
}

ClassHierarchy build_class_hierarchy(const Program& program) {
  ClassHierarchy h;
  const auto n = program.methods.size();
  h.parents_.reserve(program.classes.size());
  for (const auto& c : program.classes) h.parents_.push_back(c.parent);
  h.overridden_.assign(n, std::nullopt);
  h.overriders_.assign(n, {});
  h.is_virtual_.assign(n, false);
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto& m = program.methods[i];
    h.is_virtual_[i] = m.is_virtual();
    if (!m.override_flag) continue;
    for (auto cur = program.klass(m.owner).parent; cur; cur = program.klass(*cur).parent) {
      auto hit = std::find_if(program.klass(*cur).methods.begin(), program.klass(*cur).methods.end(),
                              [&](MethodId id) {
                                const auto& b = program.method(id);
                                return b.name == m.name && b.is_virtual();
                              });
      if (hit != program.klass(*cur).methods.end()) {
        h.overridden_[i] = *hit;
        break;
      }
    }
  }
  for (std::uint32_t i = 0; i < n; ++i) {
    for (auto up = h.overridden_[i]; up; up = h.overridden_[up->value]) {
      h.overriders_[up->value].push_back(MethodId{i});
    }
  }
  for (auto& v : h.overriders_) std::sort(v.begin(), v.end());
  return h;
}

std::vector<MethodId> ClassHierarchy::dispatch_targets(MethodId m) const {
  if (!is_virtual_.at(m.value)) {
    throw std::invalid_argument("dispatch_targets: method is not virtual");
  }
  std::vector<MethodId> out{m};
  const auto& more = overriders_.at(m.value);
  out.insert(out.end(), more.begin(), more.end());
  return out;
}

std::vector<MethodId> call_targets(const ClassHierarchy& hierarchy, const Instruction& call) {
  if (call.op == Opcode::callvirt) return hierarchy.dispatch_targets(call.method);
  return {call.method};
}

std::vector<CallSite> callsites_of(const CallGraph& graph, const ClassHierarchy& hierarchy,
                                   MethodId m) {
  if (m.value >= graph.nodes.size()) throw std::out_of_range("callsites_of: unknown method");
  std::vector<MethodId> named{m};
  for (auto up = hierarchy.overridden(m); up; up = hierarchy.overridden(*up)) named.push_back(*up);
  std::vector<CallSite> out;
  for (const auto& e : graph.edges) {
    bool hit = e.is_static ? e.callee == m
                           : std::find(named.begin(), named.end(), e.callee) != named.end();
    if (hit) out.push_back(CallSite{e.caller, e.site});
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::shared_ptr<const MethodFacts> AnalysisCache::facts(const Program& program, MethodId m) {
  {
    std::lock_guard lock(mu_);
    auto it = facts_.find(m.value);
    if (it != facts_.end()) return it->second;
  }
  // Built outside the lock; a concurrent duplicate build yields an identical
  // value and the first insert wins.
  auto built = std::make_shared<MethodFacts>();
  built->cfg = build_cfg(program, m);
  built->stacks = simulate_method(program, built->cfg);
  std::lock_guard lock(mu_);
  auto [it, inserted] = facts_.emplace(m.value, std::move(built));
  if (inserted) cfgs_built_ += 1;
  return it->second;
}

bool AnalysisCache::has_facts(MethodId m) const {
  std::lock_guard lock(mu_);
  return facts_.count(m.value) > 0;
}

std::optional<ChainValue> AnalysisCache::lookup(const ChainKey& key) {
  std::lock_guard lock(mu_);
  auto it = chains_.find(key);
  if (it == chains_.end()) return std::nullopt;
  cache_hits_ += 1;
  return it->second;
}

void AnalysisCache::store(const std::map<ChainKey, ChainValue>& entries) {
  std::lock_guard lock(mu_);
  for (const auto& [k, v] : entries) chains_.emplace(k, v);
}

std::size_t AnalysisCache::chain_entries() const {
  std::lock_guard lock(mu_);
  return chains_.size();
}

void AnalysisCache::clear() {
  std::lock_guard lock(mu_);
  facts_.clear();
  chains_.clear();
}

ProgramIndex::ProgramIndex(const Program& program)
    : program_(program),
      graph_(build_call_graph(program)),
      hierarchy_(build_class_hierarchy(program)) {
  const auto n = program.methods.size();
  std::vector<std::vector<CallSite>> static_sites(n);
  std::vector<std::vector<CallSite>> virtual_sites(n);
  for (const auto& e : graph_.edges) {
    (e.is_static ? static_sites : virtual_sites)[e.callee.value].push_back({e.caller, e.site});
  }
  callsites_.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    auto& out = callsites_[i];
    out = static_sites[i];
    for (std::optional<MethodId> named = MethodId{i}; named; named = hierarchy_.overridden(*named)) {
      const auto& v = virtual_sites[named->value];
      out.insert(out.end(), v.begin(), v.end());
    }
    std::sort(out.begin(), out.end());
  }
}

Statistics ProgramIndex::statistics() const {
  Statistics s;
  s.instructions_visited = graph_.instructions_visited;
  s.methods_scanned = cache_.methods_scanned();
  s.blocks_visited = cache_.blocks_visited();
  s.cache_hits = cache_.cache_hits();
  s.cfgs_built = cache_.cfgs_built();
  s.chain_entries = cache_.chain_entries();
  return s;
}

}  // namespace duct
