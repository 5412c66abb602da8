#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "adaloc/network.hpp"

namespace adaloc {

// .adlm model file, bit-exact layout:
//   "ADLM" | u32 version (LE) | u32 header length (LE) | header JSON bytes
//   | d * 8 bytes little-endian doubles in flat-index order
//   | 32-byte SHA-256 over everything before it
// The header JSON carries {spec, tag} plus an optional "aux" object (locked
// models store their binding hashes there).
struct ModelFile {
    ParameterStore store;
    nlohmann::json aux;  // empty object when absent
};

void write_model(const std::string& path, const ParameterStore& store,
                 const nlohmann::json& aux = nlohmann::json::object());
ModelFile read_model(const std::string& path);

// write-temp-then-rename
void atomic_write_file(const std::string& path, const std::string& contents);

}  // namespace adaloc
