// SPDX-License-Identifier: Apache-2.0
#include "core/xml.hpp"

#include <expat.h>

#include <stack>

#include "core/error.hpp"

namespace ordino::xml {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

struct BuildState {
  XML_Parser parser = nullptr;
  std::unique_ptr<Element> root;
  std::stack<Element*> open;
};

void on_start(void* user, const XML_Char* name, const XML_Char** attrs) {
  auto* state = static_cast<BuildState*>(user);
  auto element = std::make_unique<Element>();
  element->name = name;
  element->line = static_cast<int>(XML_GetCurrentLineNumber(state->parser));
  for (int i = 0; attrs[i] != nullptr; i += 2) {
    element->attributes.emplace_back(attrs[i], attrs[i + 1]);
  }
  Element* raw = element.get();
  if (state->open.empty()) {
    state->root = std::move(element);
  } else {
    state->open.top()->children.push_back(std::move(element));
  }
  state->open.push(raw);
}

void on_end(void* user, const XML_Char* /*name*/) {
  auto* state = static_cast<BuildState*>(user);
  state->open.pop();
}

void on_text(void* user, const XML_Char* s, int len) {
  auto* state = static_cast<BuildState*>(user);
  if (!state->open.empty()) state->open.top()->text.append(s, static_cast<std::size_t>(len));
}

}  // namespace

const Element* Element::child(std::string_view child_name) const {
  for (const auto& c : children) {
    if (c->name == child_name) return c.get();
  }
  return nullptr;
}

std::vector<const Element*> Element::children_named(std::string_view child_name) const {
  std::vector<const Element*> out;
  for (const auto& c : children) {
    if (c->name == child_name) out.push_back(c.get());
  }
  return out;
}

const std::string* Element::attribute(std::string_view attr_name) const {
  for (const auto& [key, value] : attributes) {
    if (key == attr_name) return &value;
  }
  return nullptr;
}

std::string Element::child_text(std::string_view child_name) const {
  const Element* c = child(child_name);
  return c ? c->trimmed_text() : std::string{};
}

std::string Element::trimmed_text() const { return trim(text); }

std::unique_ptr<Element> parse(std::string_view document) {
  BuildState state;
  std::unique_ptr<std::remove_pointer_t<XML_Parser>, decltype(&XML_ParserFree)> parser(
      XML_ParserCreate(nullptr), &XML_ParserFree);
  if (!parser) fail(ErrorCode::Internal, "cannot allocate XML parser");
  state.parser = parser.get();
  XML_SetUserData(parser.get(), &state);
  XML_SetElementHandler(parser.get(), on_start, on_end);
  XML_SetCharacterDataHandler(parser.get(), on_text);

  if (XML_Parse(parser.get(), document.data(), static_cast<int>(document.size()), XML_TRUE) ==
      XML_STATUS_ERROR) {
    fail(ErrorCode::ParseError,
         std::string("malformed XML at line ") +
             std::to_string(XML_GetCurrentLineNumber(parser.get())) + ": " +
             XML_ErrorString(XML_GetErrorCode(parser.get())));
  }
  if (!state.root) fail(ErrorCode::ParseError, "XML document has no root element");
  return std::move(state.root);
}

}  // namespace ordino::xml
