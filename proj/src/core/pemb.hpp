// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <string>

namespace ordino {

// Row-major single precision, exactly the PEMB payload layout.
using EmbeddingMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// PEMB layout: "PEMB" | u32 version = 1 | u32 T | u32 d | T*d float32, all little-endian.
std::string encode_embedding(const EmbeddingMatrix& m);
EmbeddingMatrix decode_embedding(const std::string& bytes);  // FormatError, SizeMismatch, NonFiniteValue

void save_embedding(const std::filesystem::path& path, const EmbeddingMatrix& m);
EmbeddingMatrix load_embedding(const std::filesystem::path& path);

}  // namespace ordino
