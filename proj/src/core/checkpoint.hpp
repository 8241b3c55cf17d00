#pragma once

#include "nets.hpp"

namespace ls::num {

// Single-file binary checkpoint: magic "LSCP", version, tensor count, then
// per tensor a name, shape, and little-endian float32 payload. Values are
// stored in float32 regardless of the working precision.
void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, const ParamStore*>>& stores);

// Loads into existing stores; every named parameter must exist with a
// matching shape, and every stored parameter must be consumed.
void load_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, ParamStore*>>& stores);

}  // namespace ls::num
