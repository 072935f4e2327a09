// Value types shared by the chain engine and its cache.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>

#include "duct/mil.hpp"

namespace duct {

// Ordered: when one instruction is reached along differently classified
// routes the smallest (kind, note) pair is kept.
enum class DefinitionKind : std::uint8_t {
  direct_store,
  byref_callee_store,
  field_store,
  element_store,
  unknown_address,
};

std::string_view kind_name(DefinitionKind k);

struct DefinitionSite {
  MethodId method{};
  std::uint32_t instr = 0;
  auto operator<=>(const DefinitionSite&) const = default;
};

struct DefinitionInfo {
  DefinitionKind kind = DefinitionKind::direct_store;
  std::string note;
  auto operator<=>(const DefinitionInfo&) const = default;
};

// Deduplicated by site.
class DefinitionSet {
 public:
  // Returns true when the set changed.
  bool add(DefinitionSite site, DefinitionInfo info) {
    auto [it, inserted] = defs_.try_emplace(site, info);
    if (inserted) return true;
    if (info < it->second) {
      it->second = std::move(info);
      return true;
    }
    return false;
  }
  bool merge(const DefinitionSet& other) {
    bool changed = false;
    for (const auto& [site, info] : other.defs_) changed |= add(site, info);
    return changed;
  }
  const std::map<DefinitionSite, DefinitionInfo>& entries() const { return defs_; }
  std::size_t size() const { return defs_.size(); }
  bool empty() const { return defs_.empty(); }
  bool contains(DefinitionSite s) const { return defs_.count(s) > 0; }
  bool operator==(const DefinitionSet&) const = default;

 private:
  std::map<DefinitionSite, DefinitionInfo> defs_;
};

}  // namespace duct
