// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ordino::xml {

// Small read-only DOM built with expat. Only what MusicXML ingestion needs.
struct Element {
  std::string name;
  std::vector<std::pair<std::string, std::string>> attributes;
  std::string text;
  std::vector<std::unique_ptr<Element>> children;
  int line = 0;

  const Element* child(std::string_view child_name) const;
  std::vector<const Element*> children_named(std::string_view child_name) const;
  const std::string* attribute(std::string_view attr_name) const;
  bool has_child(std::string_view child_name) const { return child(child_name) != nullptr; }

  // Text of the first matching child with surrounding whitespace removed; empty if absent.
  std::string child_text(std::string_view child_name) const;
  std::string trimmed_text() const;
};

// Throws Error(ParseError) on malformed input.
std::unique_ptr<Element> parse(std::string_view document);

}  // namespace ordino::xml
