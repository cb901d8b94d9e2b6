#include "flexkit/tokenizer.hpp"

#include <algorithm>
#include <array>

namespace flexkit {
namespace {

constexpr bool is_word_byte(unsigned char c) noexcept
{
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
}

constexpr char ascii_lower(char c) noexcept
{
    return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

template <typename Fn>
void scan_tokens(std::string_view text, Fn &&emit)
{
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n) {
        while (i < n && !is_word_byte(static_cast<unsigned char>(text[i]))) {
            ++i;
        }
        const std::size_t begin = i;
        while (i < n && is_word_byte(static_cast<unsigned char>(text[i]))) {
            ++i;
        }
        if (i > begin) {
            emit(begin, i);
        }
    }
}

std::string lowered(std::string_view s)
{
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), ascii_lower);
    return out;
}

// Sorted for binary search.
constexpr std::array<std::string_view, 64> kStopwords = {
    "a",    "about", "after", "all",   "also",  "an",    "and",   "any",   "are",   "as",    "at",
    "be",   "been",  "but",   "by",    "can",   "could", "did",   "do",    "does",  "for",   "from",
    "had",  "has",   "have",  "he",    "her",   "his",   "how",   "i",     "if",    "in",    "into",
    "is",   "it",    "its",   "more",  "no",    "not",   "of",    "on",    "or",    "other", "she",
    "so",   "some",  "such",  "than",  "that",  "the",   "their", "then",  "there", "these", "they",
    "this", "to",    "was",   "were",  "what",  "when",  "which", "who",   "with",
};

bool ends_with(std::string_view s, std::string_view suffix) noexcept
{
    return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

static_assert(std::is_sorted(kStopwords.begin(), kStopwords.end()));

} // namespace

std::vector<std::string> tokenize(std::string_view text)
{
    std::vector<std::string> out;
    scan_tokens(text, [&](std::size_t b, std::size_t e) { out.push_back(lowered(text.substr(b, e - b))); });
    return out;
}

std::vector<TokenSpan> tokenize_spans(std::string_view text)
{
    std::vector<TokenSpan> out;
    scan_tokens(text, [&](std::size_t b, std::size_t e) {
        out.push_back(TokenSpan{lowered(text.substr(b, e - b)), b, e});
    });
    return out;
}

std::size_t count_tokens(std::string_view text)
{
    std::size_t n = 0;
    scan_tokens(text, [&](std::size_t, std::size_t) { ++n; });
    return n;
}

bool is_stopword(std::string_view token) noexcept
{
    return std::binary_search(kStopwords.begin(), kStopwords.end(), token);
}

std::string s_stem(std::string_view w)
{
    if (ends_with(w, "ies") && !ends_with(w, "eies") && !ends_with(w, "aies")) {
        return std::string(w.substr(0, w.size() - 3)) + "y";
    }
    if (ends_with(w, "es") && !ends_with(w, "aes") && !ends_with(w, "ees") && !ends_with(w, "oes")) {
        return std::string(w.substr(0, w.size() - 1));
    }
    if (ends_with(w, "s") && !ends_with(w, "us") && !ends_with(w, "ss") && w.size() > 1) {
        return std::string(w.substr(0, w.size() - 1));
    }
    return std::string(w);
}

std::vector<std::string> analyze(std::string_view text, const AnalyzerOptions &options)
{
    auto tokens = tokenize(text);
    if (options.remove_stopwords) {
        std::erase_if(tokens, [](const std::string &t) { return is_stopword(t); });
    }
    if (options.stem) {
        for (auto &t : tokens) {
            t = s_stem(t);
        }
    }
    return tokens;
}

} // namespace flexkit
