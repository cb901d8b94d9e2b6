#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace flexkit::detail {

struct HtmlText {
    std::string text;
    std::optional<std::string> title;
};

/// Lightweight tag stripper; not a conforming HTML5 parser.
HtmlText extract_html(std::string_view html);

/// Decodes named (common subset) and numeric character references.
std::string decode_entities(std::string_view s);

} // namespace flexkit::detail
