// SPDX-License-Identifier: Apache-2.0
#include "core/zip.hpp"

#include <zlib.h>

#include "core/error.hpp"

namespace ordino::zip {

namespace {

constexpr std::uint32_t kLocalHeaderSig = 0x04034b50;
constexpr std::uint32_t kCentralHeaderSig = 0x02014b50;
constexpr std::uint32_t kEndOfCentralSig = 0x06054b50;

std::uint16_t u16(std::string_view b, std::size_t at) {
  if (at + 2 > b.size()) fail(ErrorCode::ParseError, "truncated zip archive");
  return static_cast<std::uint16_t>(static_cast<unsigned char>(b[at]) |
                                    (static_cast<unsigned char>(b[at + 1]) << 8));
}

std::uint32_t u32(std::string_view b, std::size_t at) {
  return static_cast<std::uint32_t>(u16(b, at)) |
         (static_cast<std::uint32_t>(u16(b, at + 2)) << 16);
}

std::string inflate_raw(std::string_view in, std::size_t expected) {
  std::string out(expected, '\0');
  z_stream zs{};
  if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) fail(ErrorCode::Internal, "inflateInit2 failed");
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(in.data()));
  zs.avail_in = static_cast<uInt>(in.size());
  zs.next_out = reinterpret_cast<Bytef*>(out.data());
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = inflate(&zs, Z_FINISH);
  const auto produced = zs.total_out;
  inflateEnd(&zs);
  if (rc != Z_STREAM_END || produced != expected) {
    fail(ErrorCode::ParseError, "corrupt deflate stream in zip archive");
  }
  return out;
}

}  // namespace

bool looks_like_zip(std::string_view bytes) {
  return bytes.size() >= 4 && bytes.substr(0, 4) == std::string_view("PK\x03\x04", 4);
}

Archive::Archive(std::string bytes) : bytes_(std::move(bytes)) {
  const std::string_view b(bytes_);
  if (b.size() < 22) fail(ErrorCode::ParseError, "zip archive too small");
  // End-of-central-directory record sits in the last 64 KiB + 22 bytes.
  std::size_t eocd = std::string_view::npos;
  const std::size_t lowest = b.size() > 65557 ? b.size() - 65557 : 0;
  for (std::size_t i = b.size() - 22 + 1; i-- > lowest;) {
    if (u32(b, i) == kEndOfCentralSig) {
      eocd = i;
      break;
    }
  }
  if (eocd == std::string_view::npos) fail(ErrorCode::ParseError, "zip end-of-directory not found");

  const std::uint16_t count = u16(b, eocd + 10);
  std::size_t at = u32(b, eocd + 16);
  for (std::uint16_t i = 0; i < count; ++i) {
    if (u32(b, at) != kCentralHeaderSig) fail(ErrorCode::ParseError, "bad zip central header");
    Entry e;
    e.method = u16(b, at + 10);
    e.compressed_size = u32(b, at + 20);
    e.uncompressed_size = u32(b, at + 24);
    const std::uint16_t name_len = u16(b, at + 28);
    const std::uint16_t extra_len = u16(b, at + 30);
    const std::uint16_t comment_len = u16(b, at + 32);
    e.local_header_offset = u32(b, at + 42);
    if (at + 46 + name_len > b.size()) fail(ErrorCode::ParseError, "truncated zip entry name");
    e.name = std::string(b.substr(at + 46, name_len));
    if (e.compressed_size == 0xFFFFFFFFu || e.local_header_offset == 0xFFFFFFFFu) {
      fail(ErrorCode::ParseError, "zip64 archives are not supported");
    }
    entries_.push_back(std::move(e));
    at += 46 + name_len + extra_len + comment_len;
  }
}

std::string Archive::read(const Entry& entry) const {
  const std::string_view b(bytes_);
  const std::size_t at = entry.local_header_offset;
  if (u32(b, at) != kLocalHeaderSig) fail(ErrorCode::ParseError, "bad zip local header");
  const std::size_t data = at + 30 + u16(b, at + 26) + u16(b, at + 28);
  if (data + entry.compressed_size > b.size()) fail(ErrorCode::ParseError, "truncated zip data");
  const std::string_view payload = b.substr(data, entry.compressed_size);
  switch (entry.method) {
    case 0: return std::string(payload);
    case 8: return inflate_raw(payload, entry.uncompressed_size);
    default:
      fail(ErrorCode::ParseError,
           "unsupported zip compression method " + std::to_string(entry.method));
  }
}

std::optional<std::string> Archive::read(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return read(e);
  }
  return std::nullopt;
}

}  // namespace ordino::zip
