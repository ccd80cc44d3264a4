// SPDX-License-Identifier: Apache-2.0
#include "core/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>

#include "core/error.hpp"
#include "core/score.hpp"

namespace ordino {

namespace {

constexpr std::uint32_t kVersion = 1;

template <typename U>
void put(std::string& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename U>
  U get() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<U>(static_cast<unsigned char>(bytes_[at_ + i])) << (8 * i);
    }
    at_ += sizeof(U);
    return v;
  }

  std::string text(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(at_, n);
    at_ += n;
    return s;
  }

  bool done() const { return at_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - at_ < n) fail(ErrorCode::FormatError, "checkpoint is truncated");
  }
  const std::string& bytes_;
  std::size_t at_ = 0;
};

}  // namespace

std::string encode_checkpoint(const nn::ParameterStore& store) {
  std::string out = "OCKP";
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(store.size()));
  for (const auto& p : store.all()) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out += p.name;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.value.rows()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.value.cols()));
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
      put<std::uint64_t>(out, std::bit_cast<std::uint64_t>(p.value.data()[i]));
    }
  }
  return out;
}

void decode_checkpoint(const std::string& bytes, nn::ParameterStore& store) {
  Reader in(bytes);
  if (in.text(4) != "OCKP") fail(ErrorCode::FormatError, "missing checkpoint magic");
  const auto version = in.get<std::uint32_t>();
  if (version != kVersion) fail(ErrorCode::FormatError, "unsupported checkpoint version " + std::to_string(version));
  const auto count = in.get<std::uint32_t>();
  if (count != store.size()) {
    fail(ErrorCode::ShapeMismatch, "checkpoint holds " + std::to_string(count) +
                                       " parameters, model has " + std::to_string(store.size()));
  }
  for (auto& p : store.all()) {
    const std::string name = in.text(in.get<std::uint32_t>());
    const auto rows = in.get<std::uint32_t>();
    const auto cols = in.get<std::uint32_t>();
    if (name != p.name || rows != p.value.rows() || cols != p.value.cols()) {
      fail(ErrorCode::ShapeMismatch, "checkpoint parameter '" + name + "' (" + std::to_string(rows) +
                                         "x" + std::to_string(cols) + ") does not match '" + p.name + "'");
    }
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
      const double v = std::bit_cast<double>(in.get<std::uint64_t>());
      if (!std::isfinite(v)) fail(ErrorCode::NonFiniteValue, "non-finite value in '" + name + "'");
      p.value.data()[i] = v;
    }
  }
  if (!in.done()) fail(ErrorCode::FormatError, "trailing bytes after checkpoint payload");
}

void save_checkpoint(const std::filesystem::path& path, const nn::ParameterStore& store) {
  const std::string bytes = encode_checkpoint(store);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

void load_checkpoint(const std::filesystem::path& path, nn::ParameterStore& store) {
  decode_checkpoint(read_file_bytes(path), store);
}

}  // namespace ordino
