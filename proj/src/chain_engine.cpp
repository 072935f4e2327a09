#include "duct/chain_engine.hpp"

#include <algorithm>
#include <utility>

#include "duct/chain_json.hpp"

namespace duct {

namespace {

using Tag = AbstractValue::Tag;
using SK = Selector::Kind;

constexpr std::size_t kMaxSolveDepth = 2000;
constexpr std::size_t kMaxRounds = 1000;

struct Match {
  bool report = false;
  bool kill = false;
  DefinitionKind kind = DefinitionKind::direct_store;
};

bool kill_capable(TrackMode m) { return m == TrackMode::own || m == TrackMode::byref_kill; }

Match match_store(const Tracked& t, const StoreTarget& target) {
  const Selector& sel = t.var.selector;
  switch (target.kind) {
    case StoreTarget::Kind::direct:
      if (target.var != t.var.var || t.mode == TrackMode::byval) return {};
      return {true, kill_capable(t.mode),
              t.mode == TrackMode::own ? DefinitionKind::direct_store
                                       : DefinitionKind::byref_callee_store};
    case StoreTarget::Kind::field:
      if (target.var != t.var.var) return {};
      if (sel.kind == SK::none) return {true, false, DefinitionKind::field_store};
      if (sel.kind == SK::field && sel.field == target.field) {
        return {true, kill_capable(t.mode), DefinitionKind::field_store};
      }
      return {};
    case StoreTarget::Kind::element:
      if (target.var != t.var.var || sel.kind == SK::field) return {};
      return {true, false, DefinitionKind::element_store};
    case StoreTarget::Kind::unknown:
      return {true, false, DefinitionKind::unknown_address};
  }
  return {};
}

struct Binding {
  std::uint32_t formal = 0;
  Selector selector{};
  TrackMode mode = TrackMode::own;
};

// How an actual argument carries the tracked variable into the callee.
std::optional<Binding> bind(const Tracked& t, const AbstractValue& a, std::uint32_t formal) {
  const VarRef v = t.var.var;
  const Selector& sel = t.var.selector;
  switch (a.tag) {
    case Tag::address_of:
      if (a.var != v) return std::nullopt;
      return Binding{formal, sel, t.mode == TrackMode::own ? TrackMode::byref_kill : t.mode};
    case Tag::value_of:
      if (a.var != v) return std::nullopt;
      return Binding{formal, sel, TrackMode::byval};
    case Tag::field_addr:
      if (!a.has_base || a.var != v) return std::nullopt;
      if (sel.kind == SK::field && sel.field == a.field) {
        return Binding{formal, Selector::none(),
                       kill_capable(t.mode) ? TrackMode::byref_kill : TrackMode::byref_nokill};
      }
      if (sel.kind == SK::none) return Binding{formal, Selector::none(), TrackMode::byref_nokill};
      return std::nullopt;
    case Tag::elem_addr:
      if (!a.has_base || a.var != v || sel.kind == SK::field) return std::nullopt;
      return Binding{formal, Selector::none(), TrackMode::byref_nokill};
    default:
      return std::nullopt;
  }
}

std::string frame_note(const Program& program, const VariableId& formal, TrackMode mode) {
  if (mode == TrackMode::own) return {};
  std::string note = "via call " + program.method_name(formal.method);
  note += mode == TrackMode::byval ? " → object " : " → byref ";
  note += program.var_name(formal.method, formal.var);
  return note;
}

ChainValue top_value(const ChainKey& key) {
  ChainValue v;
  v.killed = key.kind == ChainKey::Kind::callee_summary;
  return v;
}

}  // namespace

std::string_view kind_name(DefinitionKind k) {
  switch (k) {
    case DefinitionKind::direct_store:
      return "direct-store";
    case DefinitionKind::byref_callee_store:
      return "byref-callee-store";
    case DefinitionKind::field_store:
      return "field-store";
    case DefinitionKind::element_store:
      return "element-store";
    case DefinitionKind::unknown_address:
      return "unknown-address";
  }
  return "?";
}

ChainSearch::ChainSearch(const ProgramIndex& index, EngineOptions options)
    : index_(index), program_(index.program()), options_(options) {}

const MethodFacts& ChainSearch::facts(MethodId m) {
  auto it = facts_.find(m.value);
  if (it == facts_.end()) it = facts_.emplace(m.value, index_.cache().facts(program_, m)).first;
  return *it->second;
}

void ChainSearch::count_state() {
  ++states_;
  if (states_ >= options_.budget) truncated_ = true;
}

void ChainSearch::report(DefinitionSet& out, MethodId method, std::uint32_t instr,
                         DefinitionInfo info) {
  seen_.add({method, instr}, info);
  out.add({method, instr}, std::move(info));
}

ScanResult ChainSearch::scan_block_backward(const Tracked& t, BlockId block, std::uint32_t from) {
  const MethodId m = t.var.method;
  const auto& f = facts(m);
  const auto& body = program_.method(m).body;
  const auto& b = f.cfg.block(block);
  ScanResult out;
  for (std::uint32_t k = from; k > b.start;) {
    --k;
    const auto op = body[k].op;
    if (is_store(op)) {
      auto hit = match_store(t, f.stacks.store_targets[k]);
      if (hit.report) report(out.defs, m, k, {hit.kind, t.note});
      if (hit.kill) {
        out.killed = true;
        return out;
      }
    } else if (is_call(op)) {
      auto r = process_call_site(t, k);
      out.defs.merge(r.defs);
      if (r.killed) {
        out.killed = true;
        return out;
      }
    }
  }
  return out;
}

ScanResult ChainSearch::process_call_site(const Tracked& t, std::uint32_t site) {
  const MethodId m = t.var.method;
  const auto& ins = program_.method(m).body.at(site);
  const auto& before = facts(m).stacks.before.at(site);
  const auto arity = static_cast<std::uint32_t>(program_.method(ins.method).arity());
  const std::size_t base = before.size() - arity;

  std::vector<Binding> bindings;
  for (std::uint32_t i = 0; i < arity; ++i) {
    if (auto b = bind(t, before[base + i], i)) bindings.push_back(*b);
  }
  ScanResult out;
  if (bindings.empty()) return out;

  bool all_killed = true;
  for (MethodId target : call_targets(index_.hierarchy(), ins)) {
    for (const auto& b : bindings) {
      ChainKey key;
      key.kind = ChainKey::Kind::callee_summary;
      key.var = VariableId{target, VarRef{VarKind::arg, b.formal}, b.selector};
      key.mode = b.mode;
      key.kill_rule = options_.kill_rule;
      auto v = solve(key);
      out.defs.merge(v.defs);
      all_killed = all_killed && v.killed;
    }
  }
  out.killed = options_.kill_rule && all_killed;
  return out;
}

DefinitionSet ChainSearch::continue_at_callsites(const Tracked& t) {
  DefinitionSet out;
  const MethodId m = t.var.method;
  const auto formal = t.var.var.slot;
  const auto arity = program_.method(m).arity();
  const Selector& sel = t.var.selector;
  for (const auto& cs : index_.callsites(m)) {
    const auto& before = facts(cs.caller).stacks.before.at(cs.site);
    const auto& a = before[before.size() - arity + formal];
    std::optional<VariableId> next;
    if (a.tag == Tag::address_of || a.tag == Tag::value_of) {
      next = VariableId{cs.caller, a.var, sel};
    } else if (a.tag == Tag::field_addr && a.has_base && sel.kind == SK::none) {
      next = VariableId{cs.caller, a.var, Selector::of_field(a.field)};
    } else if (a.tag == Tag::elem_addr && a.has_base && sel.kind == SK::none) {
      next = VariableId{cs.caller, a.var, Selector::element()};
    }
    if (!next) {
      auto at = a.origin >= 0 ? static_cast<std::uint32_t>(a.origin) : cs.site;
      report(out, cs.caller, at, {DefinitionKind::direct_store, "argument at call site"});
      continue;
    }
    ChainKey key;
    key.kind = ChainKey::Kind::scan_from;
    key.var = *next;
    key.origin = cs.site;
    key.kill_rule = options_.kill_rule;
    out.merge(solve(key).defs);
  }
  return out;
}

ChainValue ChainSearch::compute(const ChainKey& key) {
  const MethodId m = key.var.method;
  const auto& cfg = facts(m).cfg;
  index_.cache().record_method_scanned();
  Tracked t{key.var, key.mode, frame_note(program_, key.var, key.mode)};

  std::set<std::pair<BlockId, std::uint32_t>> visited;
  std::vector<std::pair<BlockId, std::uint32_t>> work;
  if (key.kind == ChainKey::Kind::scan_from) {
    work.emplace_back(cfg.block_containing(key.origin), key.origin);
  } else {
    for (BlockId e : cfg.exits) work.emplace_back(e, cfg.block(e).end);
  }

  ChainValue out;
  bool reached_entry = false;
  std::size_t blocks = 0;
  while (!work.empty() && !truncated_) {
    auto [b, from] = work.back();
    work.pop_back();
    if (!visited.emplace(b, from).second) continue;
    count_state();
    ++blocks;
    auto r = scan_block_backward(t, b, from);
    out.defs.merge(r.defs);
    if (r.killed) continue;
    if (b == cfg.entry) {
      reached_entry = true;
      continue;
    }
    for (BlockId p : cfg.block(b).predecessors) work.emplace_back(p, cfg.block(p).end);
  }
  index_.cache().record_blocks_visited(blocks);

  if (key.kind == ChainKey::Kind::scan_from) {
    if (reached_entry && key.var.var.kind == VarKind::arg) out.defs.merge(continue_at_callsites(t));
  } else {
    out.killed = !reached_entry;
  }
  return out;
}

ChainValue ChainSearch::solve(const ChainKey& key) {
  auto it = table_.find(key);
  if (it != table_.end()) {
    if (it->second.in_progress) {
      cycle_ = true;
      return it->second.value;
    }
    if (it->second.round == round_) return it->second.value;
  } else if (auto hit = index_.cache().lookup(key)) {
    return *hit;
  }
  if (truncated_ || depth_ >= kMaxSolveDepth) {
    truncated_ = true;
    return it != table_.end() ? it->second.value : top_value(key);
  }
  if (it == table_.end()) it = table_.emplace(key, Entry{top_value(key), 0, false}).first;
  it->second.in_progress = true;
  ++depth_;
  ChainValue v = compute(key);
  --depth_;
  // `it` stays valid: std::map insertions do not invalidate iterators.
  Entry& e = it->second;
  e.in_progress = false;
  e.round = round_;
  if (!(v == e.value)) {
    changed_ = true;
    e.value = std::move(v);
  }
  return e.value;
}

UDChain ChainSearch::run(const UseSite& use) {
  ChainKey root;
  root.kind = ChainKey::Kind::scan_from;
  root.var = use.variable;
  root.origin = use.instr;
  root.kill_rule = options_.kill_rule;

  ChainValue result;
  for (round_ = 1;; ++round_) {
    cycle_ = false;
    changed_ = false;
    result = solve(root);
    if (truncated_ || !cycle_ || !changed_) break;
    if (round_ >= kMaxRounds) {
      truncated_ = true;
      break;
    }
  }

  if (!truncated_) {
    std::map<ChainKey, ChainValue> done;
    for (const auto& [k, e] : table_) {
      if (e.round == round_ && !e.in_progress) done.emplace(k, e.value);
    }
    index_.cache().store(done);
  } else {
    result.defs.merge(seen_);
  }

  UDChain chain;
  chain.query = use;
  chain.truncated = truncated_;
  chain.states_visited = states_;
  for (const auto& [site, info] : result.defs.entries()) {
    Definition d;
    d.method = site.method;
    d.instr = site.instr;
    d.source = program_.method(site.method).line_map.at(site.instr);
    d.kind = info.kind;
    d.note = info.note;
    chain.definitions.push_back(std::move(d));
  }
  std::stable_sort(chain.definitions.begin(), chain.definitions.end(),
                   [&](const Definition& a, const Definition& b) {
                     auto na = program_.method_name(a.method);
                     auto nb = program_.method_name(b.method);
                     if (na != nb) return na < nb;
                     return a.instr < b.instr;
                   });
  return chain;
}

UDChain compute_ud_chain(const ProgramIndex& index, const UseSite& use,
                         const EngineOptions& options) {
  return ChainSearch(index, options).run(use);
}

bool all_paths_define(const Cfg& cfg, const std::function<bool(std::uint32_t)>& defines) {
  const auto n = cfg.blocks.size();
  std::vector<bool> local(n, false);
  for (const auto& b : cfg.blocks) {
    for (auto k = b.start; k < b.end && !local[b.id]; ++k) local[b.id] = defines(k);
  }
  // Greatest fixpoint: start from "defined" everywhere except the entry.
  std::vector<bool> out(n, true);
  out[cfg.entry] = local[cfg.entry];
  for (bool changed = true; changed;) {
    changed = false;
    for (const auto& b : cfg.blocks) {
      if (b.id == cfg.entry) continue;
      bool in = true;
      for (BlockId p : b.predecessors) in = in && out[p];
      bool v = in || local[b.id];
      if (v != out[b.id]) {
        out[b.id] = v;
        changed = true;
      }
    }
  }
  return std::all_of(cfg.exits.begin(), cfg.exits.end(), [&](BlockId e) { return out[e]; });
}

std::function<bool(std::uint32_t)> direct_definition_of(const Program& program,
                                                        const MethodFacts& facts, VarRef formal) {
  const auto* body = &program.method(facts.cfg.method).body;
  const auto* targets = &facts.stacks.store_targets;
  return [body, targets, formal](std::uint32_t k) {
    if (!is_store((*body)[k].op)) return false;
    const auto& t = (*targets)[k];
    return t.kind == StoreTarget::Kind::direct && t.var == formal;
  };
}

nlohmann::ordered_json chain_json(const Program& program, const UDChain& chain) {
  using nlohmann::ordered_json;
  const auto& qm = program.method(chain.query.method);
  const auto& qloc = qm.line_map.at(chain.query.instr);
  ordered_json query;
  query["file"] = program.source_files.at(qloc.file);
  query["line"] = qloc.line;
  query["variable"] = program.describe(chain.query.variable);
  query["method"] = program.method_name(chain.query.method);
  query["instr"] = chain.query.instr;

  ordered_json defs = ordered_json::array();
  for (const auto& d : chain.definitions) {
    ordered_json j;
    j["method"] = program.method_name(d.method);
    j["file"] = program.source_files.at(d.source.file);
    j["line"] = d.source.line;
    j["instr"] = d.instr;
    j["kind"] = std::string(kind_name(d.kind));
    j["note"] = d.note;
    defs.push_back(std::move(j));
  }

  ordered_json out;
  out["query"] = std::move(query);
  out["definitions"] = std::move(defs);
  out["truncated"] = chain.truncated;
  return out;
}

std::string chain_to_json(const Program& program, const UDChain& chain, int indent) {
  return chain_json(program, chain).dump(indent);
}

}  // namespace duct
