// Per-method control flow graphs built with the usual leader rule.

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "duct/mil.hpp"

namespace duct {

using BlockId = std::uint32_t;

struct BasicBlock {
  BlockId id = 0;
  std::uint32_t start = 0;  // [start, end)
  std::uint32_t end = 0;
  std::vector<BlockId> successors;    // ascending
  std::vector<BlockId> predecessors;  // ascending
};

struct Cfg {
  MethodId method{};
  std::vector<BasicBlock> blocks;
  BlockId entry = 0;
  std::vector<BlockId> exits;  // blocks ending in ret
  std::vector<BlockId> block_of;  // instruction index -> block

  const BasicBlock& block(BlockId b) const { return blocks.at(b); }
  BlockId block_containing(std::uint32_t instr) const { return block_of.at(instr); }
};

class CfgError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Leaders: index 0, every label, and every instruction after a branch or ret.
// Throws CfgError on unreachable blocks or a branch back to the entry block.
Cfg build_cfg(const Program& program, MethodId method);

// Throws std::out_of_range for an unknown block id.
const std::vector<BlockId>& predecessors(const Cfg& cfg, BlockId block);

// `0->1 0->2 ...` one edge per line, preceded by block ranges. Used by
// `--dump-cfg` and its golden tests.
std::string dump_cfg(const Program& program, const Cfg& cfg);

}  // namespace duct
