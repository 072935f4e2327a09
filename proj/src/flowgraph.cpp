#include "duct/flowgraph.hpp"

#include <algorithm>
#include <sstream>

namespace duct {

namespace {

void add_unique(std::vector<BlockId>& v, BlockId b) {
  if (std::find(v.begin(), v.end(), b) == v.end()) v.push_back(b);
}

}  // namespace

Cfg build_cfg(const Program& program, MethodId method) {
  const auto& m = program.method(method);
  const auto n = static_cast<std::uint32_t>(m.body.size());
  std::vector<bool> leader(n, false);
  if (n > 0) leader[0] = true;
  for (std::uint32_t k = 0; k < n; ++k) {
    const auto& ins = m.body[k];
    if (ins.op == Opcode::label) leader[k] = true;
    if ((is_branch(ins.op) || ins.op == Opcode::ret) && k + 1 < n) leader[k + 1] = true;
  }

  Cfg cfg;
  cfg.method = method;
  cfg.block_of.assign(n, 0);
  for (std::uint32_t k = 0; k < n; ++k) {
    if (leader[k]) {
      BasicBlock b;
      b.id = static_cast<BlockId>(cfg.blocks.size());
      b.start = k;
      cfg.blocks.push_back(b);
    }
    cfg.block_of[k] = cfg.blocks.back().id;
    cfg.blocks.back().end = k + 1;
  }

  for (auto& b : cfg.blocks) {
    const auto& last = m.body[b.end - 1];
    if (is_branch(last.op)) add_unique(b.successors, cfg.block_of[last.target]);
    if (!ends_control(last.op) && b.end < n) add_unique(b.successors, cfg.block_of[b.end]);
    if (last.op == Opcode::ret) cfg.exits.push_back(b.id);
    std::sort(b.successors.begin(), b.successors.end());
  }
  for (const auto& b : cfg.blocks) {
    for (BlockId s : b.successors) cfg.blocks[s].predecessors.push_back(b.id);
  }
  for (auto& b : cfg.blocks) std::sort(b.predecessors.begin(), b.predecessors.end());

  if (!cfg.blocks.empty() && !cfg.blocks[0].predecessors.empty()) {
    throw CfgError(program.method_name(method) + ": the entry block is a branch target");
  }

  std::vector<bool> seen(cfg.blocks.size(), false);
  std::vector<BlockId> work{0};
  seen[0] = true;
  while (!work.empty()) {
    BlockId b = work.back();
    work.pop_back();
    for (BlockId s : cfg.blocks[b].successors) {
      if (!seen[s]) {
        seen[s] = true;
        work.push_back(s);
      }
    }
  }
  for (const auto& b : cfg.blocks) {
    if (seen[b.id]) continue;
    const auto& first = m.body[b.start];
    std::string where = first.op == Opcode::label ? "label " + first.operand
                                                  : "instruction " + std::to_string(b.start);
    throw CfgError(program.method_name(method) + ": unreachable block at " + where);
  }
  return cfg;
}

const std::vector<BlockId>& predecessors(const Cfg& cfg, BlockId block) {
  if (block >= cfg.blocks.size()) {
    throw std::out_of_range("unknown block id " + std::to_string(block));
  }
  return cfg.blocks[block].predecessors;
}

std::string dump_cfg(const Program& program, const Cfg& cfg) {
  std::ostringstream out;
  out << "cfg " << program.method_name(cfg.method) << '\n';
  for (const auto& b : cfg.blocks) {
    out << "block " << b.id << " [" << b.start << ", " << b.end << ")";
    if (b.id == cfg.entry) out << " entry";
    if (std::find(cfg.exits.begin(), cfg.exits.end(), b.id) != cfg.exits.end()) out << " exit";
    out << '\n';
  }
  for (const auto& b : cfg.blocks) {
    for (BlockId s : b.successors) out << b.id << " -> " << s << '\n';
  }
  return out.str();
}

}  // namespace duct
