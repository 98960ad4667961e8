#pragma once

#include <string>

#include <json.hpp>

#include "uasrl/grad/adam.hpp"

namespace uasrl::grad {

// Versioned flat parameter container. Byte layout (little-endian):
//   8 bytes   magic "UASRLCK1"
//   u32       endian tag 0x01020304
//   u32       metadata length M
//   M bytes   UTF-8 JSON metadata (architecture record)
//   u32       parameter count P
//   P entries of:
//     u32         name length L
//     L bytes     parameter name
//     u32         rank R
//     R x u64     dimension sizes
//     prod x f64  row-major values
// Round trips are bit-exact.

void save_checkpoint(const std::string& path, const ParameterSet& params,
                     const nlohmann::json& metadata);

struct Checkpoint {
    ParameterSet params;
    nlohmann::json metadata;
};

Checkpoint load_checkpoint(const std::string& path);

} // namespace uasrl::grad
