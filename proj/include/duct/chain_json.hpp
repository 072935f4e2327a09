// JSON form of a UDChain, for callers that extend the object (the service
// adds source context).

#pragma once

#include <json.hpp>

#include "duct/chain_engine.hpp"

namespace duct {

// {"query": {file, line, variable, method, instr},
//  "definitions": [{method, file, line, instr, kind, note}, ...],
//  "truncated": bool}
nlohmann::ordered_json chain_json(const Program& program, const UDChain& chain);

}  // namespace duct
