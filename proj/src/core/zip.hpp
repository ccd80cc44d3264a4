// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ordino::zip {

struct Entry {
  std::string name;
  std::uint16_t method = 0;  // 0 = stored, 8 = deflate
  std::uint32_t compressed_size = 0;
  std::uint32_t uncompressed_size = 0;
  std::uint32_t local_header_offset = 0;
};

// Read-only view of a zip archive held in memory (enough for compressed MusicXML).
class Archive {
 public:
  explicit Archive(std::string bytes);

  const std::vector<Entry>& entries() const { return entries_; }
  std::optional<std::string> read(std::string_view name) const;
  std::string read(const Entry& entry) const;

 private:
  std::string bytes_;
  std::vector<Entry> entries_;
};

bool looks_like_zip(std::string_view bytes);

}  // namespace ordino::zip
