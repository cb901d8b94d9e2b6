#pragma once

// Document parsing, chunking and knowledge filtering: raw files in, schema documents out.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "flexkit/corpus_store.hpp"

namespace flexkit {

enum class DocFormat { html, markdown, plain };

[[nodiscard]] DocFormat parse_doc_format(std::string_view name);
[[nodiscard]] std::string_view to_string(DocFormat format) noexcept;

struct ParsedDocument {
    std::string source_uri;
    std::string text;
    std::optional<std::string> title;
    DocFormat format = DocFormat::plain;

    friend bool operator==(const ParsedDocument &, const ParsedDocument &) = default;
};

[[nodiscard]] bool is_valid_utf8(std::string_view bytes) noexcept;

/// Extracts readable text.
///
/// html: tags stripped, block elements become line breaks, script/style/nav/footer and similar
/// chrome dropped, entities decoded, <title> captured separately.
/// markdown/plain: CRLF and lone CR become LF; runs of three or more blank lines collapse to one.
///
/// Throws FormatError for invalid UTF-8 or when nothing readable remains.
[[nodiscard]] ParsedDocument parse_document(std::string_view bytes, DocFormat format, std::string source_uri = {});

/// Newline normalisation shared by the markdown and plain parsers.
[[nodiscard]] std::string normalize_newlines(std::string_view text);

struct Chunk {
    std::string parent_uri;
    std::size_t chunk_index = 0;
    std::string text;
    /// Half-open range in tokenizer units of the parent text.
    std::size_t token_begin = 0;
    std::size_t token_end = 0;

    friend bool operator==(const Chunk &, const Chunk &) = default;
};

/// Fixed windows of `size` tokens advancing by size - overlap. The last window may be short.
[[nodiscard]] std::vector<Chunk> chunk_fixed(std::string_view text, std::size_t size, std::size_t overlap,
                                             std::string_view parent_uri = {});

/// Greedy packing of whole sentences into chunks of at most max_tokens. A sentence longer than
/// max_tokens is split with chunk_fixed(size = max_tokens, overlap = 0) over its own tokens.
[[nodiscard]] std::vector<Chunk> chunk_sentence(std::string_view text, std::size_t max_tokens,
                                                std::string_view parent_uri = {});

/// Sentence units as half-open token ranges. Boundaries: '.', '!' or '?' followed by whitespace
/// or end of text, and any newline.
[[nodiscard]] std::vector<std::pair<std::size_t, std::size_t>> sentence_token_ranges(std::string_view text);

struct KnowledgeRule {
    enum class Kind { drop_if_shorter_than, dedupe_exact, strip_boilerplate_lines };
    Kind kind;
    std::size_t parameter = 0;

    friend bool operator==(const KnowledgeRule &, const KnowledgeRule &) = default;
};

/// Parses "drop_if_shorter_than:5,dedupe_exact,strip_boilerplate_lines:3".
[[nodiscard]] std::vector<KnowledgeRule> parse_knowledge_rules(std::string_view spec);

/// Applies rules in order to `field`. Output order is stable; never grows the input.
[[nodiscard]] std::vector<Document> knowledge_preprocess(std::vector<Document> documents,
                                                         const std::vector<KnowledgeRule> &rules,
                                                         std::string_view field = "text");

enum class ChunkerKind { none, fixed, sentence };

[[nodiscard]] ChunkerKind parse_chunker(std::string_view name);

struct PreprocessOptions {
    /// Unset means detect from the file extension.
    std::optional<DocFormat> format;
    ChunkerKind chunker = ChunkerKind::sentence;
    std::size_t chunk_size = 128;
    std::size_t chunk_overlap = 0;
    std::vector<KnowledgeRule> rules;
};

/// .html/.htm/.xhtml, .md/.markdown, .txt/.text; nullopt otherwise.
[[nodiscard]] std::optional<DocFormat> format_from_extension(const std::filesystem::path &path);

struct PreprocessResult {
    /// Fields "text" and "title"; metadata "source" (path relative to the input root) and "chunk".
    std::vector<Document> documents;
    std::vector<std::pair<std::string, std::string>> skipped; // source, reason
};

/// Parse, chunk, then apply knowledge rules over the chunks. `root` is stripped from source paths.
[[nodiscard]] PreprocessResult preprocess_files(std::span<const std::filesystem::path> files,
                                                const std::filesystem::path &root, const PreprocessOptions &options);
/// Every regular file below `dir` in sorted path order. With format detection, unknown extensions are skipped.
[[nodiscard]] PreprocessResult preprocess_directory(const std::filesystem::path &dir, const PreprocessOptions &options);

} // namespace flexkit
