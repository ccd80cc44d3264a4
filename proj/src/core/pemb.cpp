// SPDX-License-Identifier: Apache-2.0
#include "core/pemb.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "core/error.hpp"
#include "core/score.hpp"

namespace ordino {

namespace {

constexpr std::uint32_t kPembVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32(const std::string& in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + static_cast<std::size_t>(i)]))
         << (8 * i);
  }
  return v;
}

}  // namespace

std::string encode_embedding(const EmbeddingMatrix& m) {
  if (!m.allFinite()) fail(ErrorCode::NonFiniteValue, "embedding contains non-finite values");
  std::string out = "PEMB";
  put_u32(out, kPembVersion);
  put_u32(out, static_cast<std::uint32_t>(m.rows()));
  put_u32(out, static_cast<std::uint32_t>(m.cols()));
  out.reserve(out.size() + static_cast<std::size_t>(m.size()) * 4);
  for (Eigen::Index i = 0; i < m.size(); ++i) put_u32(out, std::bit_cast<std::uint32_t>(m.data()[i]));
  return out;
}

EmbeddingMatrix decode_embedding(const std::string& bytes) {
  if (bytes.size() < 16 || bytes.compare(0, 4, "PEMB") != 0) {
    fail(ErrorCode::FormatError, "missing PEMB magic");
  }
  const std::uint32_t version = get_u32(bytes, 4);
  if (version != kPembVersion) {
    fail(ErrorCode::FormatError, "unsupported PEMB version " + std::to_string(version));
  }
  const std::uint64_t rows = get_u32(bytes, 8);
  const std::uint64_t cols = get_u32(bytes, 12);
  const std::uint64_t payload = bytes.size() - 16;
  if (payload % 4 != 0 || payload / 4 != rows * cols) {
    fail(ErrorCode::SizeMismatch, "PEMB header declares " + std::to_string(rows) + "x" +
                                      std::to_string(cols) + " but payload holds " +
                                      std::to_string(payload / 4) + " floats");
  }
  EmbeddingMatrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    const float v = std::bit_cast<float>(get_u32(bytes, 16 + 4 * static_cast<std::size_t>(i)));
    if (!std::isfinite(v)) {
      fail(ErrorCode::NonFiniteValue, "non-finite value at element " + std::to_string(i));
    }
    m.data()[i] = v;
  }
  return m;
}

void save_embedding(const std::filesystem::path& path, const EmbeddingMatrix& m) {
  const std::string bytes = encode_embedding(m);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

EmbeddingMatrix load_embedding(const std::filesystem::path& path) {
  return decode_embedding(read_file_bytes(path));
}

}  // namespace ordino
