#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace flexkit {

/// A token together with its byte range in the source text.
struct TokenSpan {
    std::string text;
    std::size_t begin = 0;
    std::size_t end = 0;

    friend bool operator==(const TokenSpan &, const TokenSpan &) = default;
};

/// The one tokenizer used for BM25, chunk accounting, refiners and lexical reranking.
///
/// Text is split on every byte that is not an ASCII letter or digit. Bytes >= 0x80 count as
/// word characters so multi-byte UTF-8 sequences stay inside their token. ASCII letters are
/// lowercased; nothing else is changed.
[[nodiscard]] std::vector<std::string> tokenize(std::string_view text);
[[nodiscard]] std::vector<TokenSpan> tokenize_spans(std::string_view text);
[[nodiscard]] std::size_t count_tokens(std::string_view text);

/// Opt-in analysis steps on top of tokenize(). Both default off.
struct AnalyzerOptions {
    bool remove_stopwords = false;
    bool stem = false;

    friend bool operator==(const AnalyzerOptions &, const AnalyzerOptions &) = default;
};

[[nodiscard]] std::vector<std::string> analyze(std::string_view text, const AnalyzerOptions &options);

[[nodiscard]] bool is_stopword(std::string_view token) noexcept;

/// Harman's plural-stripping "S" stemmer.
[[nodiscard]] std::string s_stem(std::string_view token);

} // namespace flexkit
