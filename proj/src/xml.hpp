#pragma once

// Minimal XML reader for cascade model files: elements, attributes, text,
// comments, declarations and the five predefined entities. No DTDs, no
// namespaces, no CDATA.

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace somiap::xml {

struct Node {
    std::string name;
    std::vector<std::pair<std::string, std::string>> attributes;
    std::string text;  ///< concatenated character data of this element
    std::vector<Node> children;

    const Node* child(std::string_view child_name) const;
    const std::string* attribute(std::string_view attr) const;
};

/// Parses a document and returns its root element. Throws ParseError with a
/// line number on malformed input.
Node parse(std::string_view text);

std::string escape(std::string_view text);

}  // namespace somiap::xml
