// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>

#include "core/nn/parameter.hpp"

namespace ordino {

// Layout (little-endian): "OCKP", u32 version = 1, u32 parameter count, then per
// parameter: u32 name length, name bytes, u32 rows, u32 cols, rows*cols f64 column-major.
std::string encode_checkpoint(const nn::ParameterStore& store);

// Loads values into a store of identical structure. Errors: FormatError, ShapeMismatch.
void decode_checkpoint(const std::string& bytes, nn::ParameterStore& store);

void save_checkpoint(const std::filesystem::path& path, const nn::ParameterStore& store);
void load_checkpoint(const std::filesystem::path& path, nn::ParameterStore& store);

}  // namespace ordino
