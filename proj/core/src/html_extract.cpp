#include "html_extract.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <utility>
#include <vector>

namespace flexkit::detail {
namespace {

using namespace std::string_view_literals;

// Elements whose whole subtree is dropped.
constexpr std::array kDroppedElements = {
    "aside"sv, "button"sv, "canvas"sv, "footer"sv, "form"sv, "iframe"sv, "nav"sv, "noscript"sv, "select"sv, "svg"sv, "template"sv,
};

// Raw-text elements: content runs until the matching close tag, no nested markup.
constexpr std::array kRawTextElements = {"script"sv, "style"sv, "title"sv, "textarea"sv};

constexpr std::array kBlockElements = {
    "address"sv, "article"sv, "blockquote"sv, "br"sv, "caption"sv, "dd"sv, "div"sv, "dl"sv, "dt"sv,
    "figcaption"sv, "figure"sv, "h1"sv, "h2"sv, "h3"sv, "h4"sv, "h5"sv, "h6"sv, "header"sv, "hr"sv,
    "li"sv, "main"sv, "ol"sv, "p"sv, "pre"sv, "section"sv, "table"sv, "tbody"sv, "thead"sv, "tfoot"sv,
    "tr"sv, "ul"sv, "body"sv, "html"sv, "head"sv,
};

template <std::size_t N>
bool contains(const std::array<std::string_view, N> &set, std::string_view name)
{
    return std::find(set.begin(), set.end(), name) != set.end();
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

bool is_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }

char lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

void append_utf8(std::string &out, std::uint32_t cp)
{
    if (cp == 0 || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
        cp = 0xFFFD;
    }
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

struct NamedEntity {
    std::string_view name;
    std::uint32_t codepoint;
};

// nbsp decodes to a plain space so whitespace collapsing treats it uniformly.
constexpr std::array<NamedEntity, 20> kNamedEntities = {{
    {"amp", '&'},      {"lt", '<'},       {"gt", '>'},       {"quot", '"'},     {"apos", '\''},
    {"nbsp", ' '},     {"copy", 0xA9},    {"reg", 0xAE},     {"trade", 0x2122}, {"mdash", 0x2014},
    {"ndash", 0x2013}, {"hellip", 0x2026}, {"laquo", 0xAB},  {"raquo", 0xBB},   {"lsquo", 0x2018},
    {"rsquo", 0x2019}, {"ldquo", 0x201C}, {"rdquo", 0x201D}, {"euro", 0x20AC},  {"middot", 0xB7},
}};

std::string collapse_whitespace(std::string_view s)
{
    std::string out;
    bool pending_space = false;
    for (char c : s) {
        if (is_space(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(c);
    }
    return out;
}

std::size_t find_ci(std::string_view hay, std::string_view needle, std::size_t from)
{
    if (needle.empty() || hay.size() < needle.size()) {
        return std::string_view::npos;
    }
    for (std::size_t i = from; i + needle.size() <= hay.size(); ++i) {
        bool match = true;
        for (std::size_t j = 0; j < needle.size(); ++j) {
            if (lower(hay[i + j]) != needle[j]) {
                match = false;
                break;
            }
        }
        if (match) {
            return i;
        }
    }
    return std::string_view::npos;
}

class Extractor {
public:
    explicit Extractor(std::string_view html) : html_(html) {}

    HtmlText run()
    {
        std::size_t i = 0;
        const std::size_t n = html_.size();
        std::size_t text_start = 0;
        while (i < n) {
            if (html_[i] != '<') {
                ++i;
                continue;
            }
            flush_text(text_start, i);
            text_start = i;
            const std::size_t next = handle_markup(i);
            if (next == i) {
                // a bare '<' that does not start markup stays in the text run
                ++i;
                continue;
            }
            i = next;
            text_start = i;
        }
        flush_text(text_start, n);
        end_line();

        HtmlText out;
        for (std::size_t k = 0; k < lines_.size(); ++k) {
            if (k > 0) {
                out.text.push_back('\n');
            }
            out.text += lines_[k];
        }
        out.title = std::move(title_);
        return out;
    }

private:
    void flush_text(std::size_t begin, std::size_t end)
    {
        if (end <= begin || !skip_stack_.empty()) {
            return;
        }
        current_.append(html_.substr(begin, end - begin));
    }

    void end_line()
    {
        auto line = collapse_whitespace(decode_entities(current_));
        current_.clear();
        if (!line.empty()) {
            lines_.push_back(std::move(line));
        }
    }

    // Returns the index after the markup construct, or `lt` if this '<' is literal text.
    std::size_t handle_markup(std::size_t lt)
    {
        const std::size_t n = html_.size();
        if (html_.substr(lt, 4) == "<!--") {
            const auto close = html_.find("-->", lt + 4);
            return close == std::string_view::npos ? n : close + 3;
        }
        if (lt + 1 < n && (html_[lt + 1] == '!' || html_[lt + 1] == '?')) {
            const auto close = html_.find('>', lt + 2);
            return close == std::string_view::npos ? n : close + 1;
        }
        std::size_t p = lt + 1;
        const bool closing = p < n && html_[p] == '/';
        if (closing) {
            ++p;
        }
        if (p >= n || !is_alpha(html_[p])) {
            return lt;
        }
        std::string name;
        while (p < n && (is_alpha(html_[p]) || (html_[p] >= '0' && html_[p] <= '9') || html_[p] == '-')) {
            name.push_back(lower(html_[p]));
            ++p;
        }
        // Skip attributes, honouring quotes.
        char quote = 0;
        bool self_closing = false;
        while (p < n) {
            const char c = html_[p];
            if (quote != 0) {
                if (c == quote) {
                    quote = 0;
                }
            } else if (c == '"' || c == '\'') {
                quote = c;
            } else if (c == '>') {
                self_closing = p > lt && html_[p - 1] == '/';
                break;
            }
            ++p;
        }
        const std::size_t after = p < n ? p + 1 : n;

        if (closing) {
            on_close(name);
            return after;
        }
        if (contains(kRawTextElements, name)) {
            const std::string close_tag = "</" + name;
            const auto close = find_ci(html_, close_tag, after);
            const std::size_t content_end = close == std::string_view::npos ? n : close;
            if (name == "title" && !title_ && skip_stack_.empty()) {
                auto t = collapse_whitespace(decode_entities(html_.substr(after, content_end - after)));
                if (!t.empty()) {
                    title_ = std::move(t);
                }
            }
            if (close == std::string_view::npos) {
                return n;
            }
            const auto gt = html_.find('>', close);
            return gt == std::string_view::npos ? n : gt + 1;
        }
        on_open(name, self_closing);
        return after;
    }

    void on_open(const std::string &name, bool self_closing)
    {
        if (contains(kDroppedElements, name)) {
            if (!self_closing) {
                if (skip_stack_.empty()) {
                    end_line();
                }
                skip_stack_.push_back(name);
            }
            return;
        }
        if (skip_stack_.empty() && contains(kBlockElements, name)) {
            end_line();
        }
    }

    void on_close(const std::string &name)
    {
        if (!skip_stack_.empty()) {
            // Pop back to the matching open element; ignore stray closers.
            const auto it = std::find(skip_stack_.rbegin(), skip_stack_.rend(), name);
            if (it != skip_stack_.rend()) {
                skip_stack_.erase(std::next(it).base(), skip_stack_.end());
            }
            return;
        }
        if (contains(kBlockElements, name)) {
            end_line();
        }
    }

    std::string_view html_;
    std::string current_;
    std::vector<std::string> lines_;
    std::vector<std::string> skip_stack_;
    std::optional<std::string> title_;
};

} // namespace

std::string decode_entities(std::string_view s)
{
    std::string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        if (s[i] != '&') {
            out.push_back(s[i++]);
            continue;
        }
        const auto semi = s.find(';', i + 1);
        if (semi == std::string_view::npos || semi - i > 12) {
            out.push_back(s[i++]);
            continue;
        }
        const std::string_view body = s.substr(i + 1, semi - i - 1);
        bool decoded = false;
        if (body.size() >= 2 && body[0] == '#') {
            std::uint32_t cp = 0;
            bool ok = true;
            const bool hex = body[1] == 'x' || body[1] == 'X';
            const std::string_view digits = body.substr(hex ? 2 : 1);
            ok = !digits.empty();
            for (char c : digits) {
                std::uint32_t d = 0;
                if (c >= '0' && c <= '9') {
                    d = static_cast<std::uint32_t>(c - '0');
                } else if (hex && lower(c) >= 'a' && lower(c) <= 'f') {
                    d = static_cast<std::uint32_t>(lower(c) - 'a' + 10);
                } else {
                    ok = false;
                    break;
                }
                cp = cp * (hex ? 16 : 10) + d;
                if (cp > 0x10FFFF) {
                    cp = 0x110000;
                }
            }
            if (ok) {
                append_utf8(out, cp);
                decoded = true;
            }
        } else {
            for (const auto &e : kNamedEntities) {
                if (e.name == body) {
                    append_utf8(out, e.codepoint);
                    decoded = true;
                    break;
                }
            }
        }
        if (decoded) {
            i = semi + 1;
        } else {
            out.push_back(s[i++]);
        }
    }
    return out;
}

HtmlText extract_html(std::string_view html) { return Extractor(html).run(); }

} // namespace flexkit::detail
