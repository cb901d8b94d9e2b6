#include "flexkit/preprocess.hpp"

#include "flexkit/errors.hpp"
#include "flexkit/tokenizer.hpp"
#include "html_extract.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>
#include <map>
#include <set>
#include <unordered_map>
#include <unordered_set>

namespace flexkit {
namespace {

std::string_view trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r\f\v");
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r\f\v");
    return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_lines(std::string_view text)
{
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (true) {
        const auto nl = text.find('\n', start);
        if (nl == std::string_view::npos) {
            lines.push_back(text.substr(start));
            break;
        }
        lines.push_back(text.substr(start, nl - start));
        start = nl + 1;
    }
    return lines;
}

bool has_visible_text(std::string_view s)
{
    return s.find_first_not_of(" \t\n\r\f\v") != std::string_view::npos;
}

std::optional<std::string> markdown_title(std::string_view text)
{
    for (auto line : split_lines(text)) {
        const auto t = trim(line);
        if (t.starts_with("# ")) {
            auto title = std::string(trim(t.substr(2)));
            if (!title.empty()) {
                return title;
            }
        }
    }
    return std::nullopt;
}

Chunk make_chunk(std::string_view text, const std::vector<TokenSpan> &tokens, std::size_t begin, std::size_t end,
                 std::string_view parent, std::size_t index)
{
    Chunk c;
    c.parent_uri = std::string(parent);
    c.chunk_index = index;
    c.token_begin = begin;
    c.token_end = end;
    const auto byte_begin = tokens[begin].begin;
    c.text = std::string(text.substr(byte_begin, tokens[end - 1].end - byte_begin));
    return c;
}

} // namespace

DocFormat parse_doc_format(std::string_view name)
{
    if (name == "html" || name == "htm") {
        return DocFormat::html;
    }
    if (name == "markdown" || name == "md") {
        return DocFormat::markdown;
    }
    if (name == "plain" || name == "text" || name == "txt") {
        return DocFormat::plain;
    }
    throw InvalidArgument("unsupported document format '" + std::string(name) + "'");
}

std::string_view to_string(DocFormat format) noexcept
{
    switch (format) {
    case DocFormat::html:
        return "html";
    case DocFormat::markdown:
        return "markdown";
    case DocFormat::plain:
        return "plain";
    }
    return "plain";
}

bool is_valid_utf8(std::string_view bytes) noexcept
{
    std::size_t i = 0;
    const std::size_t n = bytes.size();
    while (i < n) {
        const auto c = static_cast<unsigned char>(bytes[i]);
        std::size_t len = 0;
        std::uint32_t cp = 0;
        if (c < 0x80) {
            ++i;
            continue;
        }
        if ((c & 0xE0) == 0xC0) {
            len = 2;
            cp = c & 0x1F;
        } else if ((c & 0xF0) == 0xE0) {
            len = 3;
            cp = c & 0x0F;
        } else if ((c & 0xF8) == 0xF0) {
            len = 4;
            cp = c & 0x07;
        } else {
            return false;
        }
        if (i + len > n) {
            return false;
        }
        for (std::size_t k = 1; k < len; ++k) {
            const auto cc = static_cast<unsigned char>(bytes[i + k]);
            if ((cc & 0xC0) != 0x80) {
                return false;
            }
            cp = (cp << 6) | (cc & 0x3F);
        }
        // overlong, surrogate and out-of-range encodings
        if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) || cp > 0x10FFFF ||
            (cp >= 0xD800 && cp <= 0xDFFF)) {
            return false;
        }
        i += len;
    }
    return true;
}

std::string normalize_newlines(std::string_view text)
{
    std::string unified;
    unified.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '\r') {
            unified.push_back('\n');
            if (i + 1 < text.size() && text[i + 1] == '\n') {
                ++i;
            }
        } else {
            unified.push_back(text[i]);
        }
    }

    const auto lines = split_lines(unified);
    std::string out;
    out.reserve(unified.size());
    std::size_t i = 0;
    bool first = true;
    auto emit = [&](std::string_view line) {
        if (!first) {
            out.push_back('\n');
        }
        out.append(line);
        first = false;
    };
    while (i < lines.size()) {
        if (!trim(lines[i]).empty()) {
            emit(lines[i]);
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < lines.size() && trim(lines[j]).empty()) {
            ++j;
        }
        if (j - i > 2) {
            emit("");
        } else {
            for (std::size_t k = i; k < j; ++k) {
                emit(lines[k]);
            }
        }
        i = j;
    }
    return out;
}

ParsedDocument parse_document(std::string_view bytes, DocFormat format, std::string source_uri)
{
    if (bytes.starts_with("\xEF\xBB\xBF")) {
        bytes.remove_prefix(3);
    }
    if (!is_valid_utf8(bytes)) {
        throw FormatError("input is not valid UTF-8" + (source_uri.empty() ? std::string() : ": " + source_uri));
    }
    ParsedDocument doc;
    doc.source_uri = std::move(source_uri);
    doc.format = format;
    switch (format) {
    case DocFormat::html: {
        auto extracted = detail::extract_html(bytes);
        doc.text = std::move(extracted.text);
        doc.title = std::move(extracted.title);
        break;
    }
    case DocFormat::markdown:
        doc.text = normalize_newlines(bytes);
        doc.title = markdown_title(doc.text);
        break;
    case DocFormat::plain:
        doc.text = normalize_newlines(bytes);
        break;
    }
    if (!has_visible_text(doc.text)) {
        throw FormatError("no readable text extracted" + (doc.source_uri.empty() ? std::string() : " from " + doc.source_uri));
    }
    return doc;
}

std::vector<Chunk> chunk_fixed(std::string_view text, std::size_t size, std::size_t overlap, std::string_view parent_uri)
{
    if (size == 0) {
        throw InvalidArgument("chunk size must be positive");
    }
    if (overlap >= size) {
        throw InvalidArgument("chunk overlap must be smaller than chunk size");
    }
    const auto tokens = tokenize_spans(text);
    std::vector<Chunk> chunks;
    const std::size_t stride = size - overlap;
    for (std::size_t start = 0; start < tokens.size(); start += stride) {
        const std::size_t end = std::min(start + size, tokens.size());
        chunks.push_back(make_chunk(text, tokens, start, end, parent_uri, chunks.size()));
        if (end == tokens.size()) {
            break;
        }
    }
    return chunks;
}

std::vector<std::pair<std::size_t, std::size_t>> sentence_token_ranges(std::string_view text)
{
    const auto tokens = tokenize_spans(text);
    std::vector<std::size_t> boundaries; // byte offsets ending a sentence
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (c == '\n') {
            boundaries.push_back(i);
        } else if (c == '.' || c == '!' || c == '?') {
            const bool at_end = i + 1 == text.size();
            const bool before_space = !at_end && (text[i + 1] == ' ' || text[i + 1] == '\t' || text[i + 1] == '\n' ||
                                                  text[i + 1] == '\r');
            if (at_end || before_space) {
                boundaries.push_back(i);
            }
        }
    }
    std::vector<std::pair<std::size_t, std::size_t>> ranges;
    std::size_t b = 0;
    std::size_t start = 0;
    for (std::size_t t = 0; t < tokens.size(); ++t) {
        std::size_t crossed = 0;
        while (b < boundaries.size() && boundaries[b] < tokens[t].begin) {
            ++b;
            ++crossed;
        }
        if (crossed > 0 && t > start) {
            ranges.emplace_back(start, t);
            start = t;
        }
    }
    if (tokens.size() > start) {
        ranges.emplace_back(start, tokens.size());
    }
    return ranges;
}

std::vector<Chunk> chunk_sentence(std::string_view text, std::size_t max_tokens, std::string_view parent_uri)
{
    if (max_tokens == 0) {
        throw InvalidArgument("max_tokens must be positive");
    }
    const auto tokens = tokenize_spans(text);
    std::vector<Chunk> chunks;
    std::optional<std::pair<std::size_t, std::size_t>> current;
    auto emit_current = [&] {
        if (current) {
            chunks.push_back(make_chunk(text, tokens, current->first, current->second, parent_uri, chunks.size()));
            current.reset();
        }
    };
    for (const auto &[sb, se] : sentence_token_ranges(text)) {
        const std::size_t len = se - sb;
        if (len > max_tokens) {
            emit_current();
            for (std::size_t start = sb; start < se; start += max_tokens) {
                const std::size_t end = std::min(start + max_tokens, se);
                chunks.push_back(make_chunk(text, tokens, start, end, parent_uri, chunks.size()));
            }
            continue;
        }
        if (current && (current->second - current->first) + len <= max_tokens) {
            current->second = se;
            continue;
        }
        emit_current();
        current = std::make_pair(sb, se);
    }
    emit_current();
    return chunks;
}

std::vector<KnowledgeRule> parse_knowledge_rules(std::string_view spec)
{
    std::vector<KnowledgeRule> rules;
    std::size_t start = 0;
    while (start <= spec.size()) {
        auto comma = spec.find(',', start);
        if (comma == std::string_view::npos) {
            comma = spec.size();
        }
        const auto item = trim(spec.substr(start, comma - start));
        start = comma + 1;
        if (item.empty()) {
            if (comma == spec.size()) {
                break;
            }
            continue;
        }
        std::string_view name = item;
        std::optional<std::size_t> param;
        if (const auto colon = item.find_first_of(":="); colon != std::string_view::npos) {
            name = trim(item.substr(0, colon));
            const auto value = trim(item.substr(colon + 1));
            std::size_t v = 0;
            const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
            if (ec != std::errc{} || ptr != value.data() + value.size()) {
                throw InvalidArgument("rule '" + std::string(name) + "' has a non-numeric parameter");
            }
            param = v;
        }
        KnowledgeRule rule{};
        if (name == "drop_if_shorter_than") {
            rule.kind = KnowledgeRule::Kind::drop_if_shorter_than;
        } else if (name == "dedupe_exact") {
            rule.kind = KnowledgeRule::Kind::dedupe_exact;
        } else if (name == "strip_boilerplate_lines") {
            rule.kind = KnowledgeRule::Kind::strip_boilerplate_lines;
        } else {
            throw InvalidArgument("unknown knowledge rule '" + std::string(name) + "'");
        }
        if (rule.kind != KnowledgeRule::Kind::dedupe_exact) {
            if (!param) {
                throw InvalidArgument("rule '" + std::string(name) + "' requires a numeric parameter");
            }
            rule.parameter = *param;
        }
        rules.push_back(rule);
        if (comma == spec.size()) {
            break;
        }
    }
    return rules;
}

std::vector<Document> knowledge_preprocess(std::vector<Document> documents, const std::vector<KnowledgeRule> &rules,
                                           std::string_view field)
{
    const std::string key(field);
    auto text_of = [&](const Document &d) -> std::string_view {
        const auto it = d.fields.find(key);
        return it == d.fields.end() ? std::string_view{} : std::string_view(it->second);
    };

    for (const auto &rule : rules) {
        switch (rule.kind) {
        case KnowledgeRule::Kind::drop_if_shorter_than:
            std::erase_if(documents, [&](const Document &d) { return count_tokens(text_of(d)) < rule.parameter; });
            break;
        case KnowledgeRule::Kind::dedupe_exact: {
            std::unordered_set<std::string> seen;
            std::vector<Document> kept;
            kept.reserve(documents.size());
            for (auto &d : documents) {
                if (d.fields.find(key) == d.fields.end() || seen.emplace(text_of(d)).second) {
                    kept.push_back(std::move(d));
                }
            }
            documents = std::move(kept);
            break;
        }
        case KnowledgeRule::Kind::strip_boilerplate_lines: {
            std::unordered_map<std::string, std::size_t> doc_freq;
            for (const auto &d : documents) {
                std::set<std::string_view> distinct;
                for (auto line : split_lines(text_of(d))) {
                    if (const auto t = trim(line); !t.empty()) {
                        distinct.insert(t);
                    }
                }
                for (auto line : distinct) {
                    ++doc_freq[std::string(line)];
                }
            }
            for (auto &d : documents) {
                const auto it = d.fields.find(key);
                if (it == d.fields.end()) {
                    continue;
                }
                std::string rebuilt;
                bool first = true;
                for (auto line : split_lines(it->second)) {
                    const auto t = trim(line);
                    if (!t.empty()) {
                        const auto f = doc_freq.find(std::string(t));
                        if (f != doc_freq.end() && f->second >= rule.parameter) {
                            continue;
                        }
                    }
                    if (!first) {
                        rebuilt.push_back('\n');
                    }
                    rebuilt.append(line);
                    first = false;
                }
                if (!has_visible_text(rebuilt)) {
                    rebuilt.clear();
                }
                it->second = std::move(rebuilt);
            }
            std::erase_if(documents, [](const Document &d) {
                return std::none_of(d.fields.begin(), d.fields.end(),
                                    [](const auto &f) { return has_visible_text(f.second); });
            });
            break;
        }
        }
    }
    return documents;
}

ChunkerKind parse_chunker(std::string_view name)
{
    if (name == "none") {
        return ChunkerKind::none;
    }
    if (name == "fixed") {
        return ChunkerKind::fixed;
    }
    if (name == "sentence") {
        return ChunkerKind::sentence;
    }
    throw InvalidArgument("unknown chunker '" + std::string(name) + "' (expected none, fixed or sentence)");
}

std::optional<DocFormat> format_from_extension(const std::filesystem::path &path)
{
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".html" || ext == ".htm" || ext == ".xhtml") {
        return DocFormat::html;
    }
    if (ext == ".md" || ext == ".markdown") {
        return DocFormat::markdown;
    }
    if (ext == ".txt" || ext == ".text") {
        return DocFormat::plain;
    }
    return std::nullopt;
}

PreprocessResult preprocess_files(std::span<const std::filesystem::path> files, const std::filesystem::path &root,
                                  const PreprocessOptions &options)
{
    PreprocessResult result;
    for (const auto &file : files) {
        const auto source = root.empty() ? file.generic_string() : file.lexically_relative(root).generic_string();
        const auto format = options.format ? options.format : format_from_extension(file);
        if (!format) {
            result.skipped.emplace_back(source, "unrecognised file extension");
            continue;
        }
        std::ifstream in(file, std::ios::binary);
        if (!in) {
            throw IoError("cannot read " + file.string());
        }
        std::ostringstream bytes;
        bytes << in.rdbuf();

        ParsedDocument parsed;
        try {
            parsed = parse_document(bytes.str(), *format, source);
        } catch (const FormatError &e) {
            spdlog::warn("preprocess: skipping {}: {}", source, e.what());
            result.skipped.emplace_back(source, e.what());
            continue;
        }

        std::vector<std::string> pieces;
        switch (options.chunker) {
        case ChunkerKind::none:
            pieces.push_back(parsed.text);
            break;
        case ChunkerKind::fixed:
            for (auto &c : chunk_fixed(parsed.text, options.chunk_size, options.chunk_overlap, source)) {
                pieces.push_back(std::move(c.text));
            }
            break;
        case ChunkerKind::sentence:
            for (auto &c : chunk_sentence(parsed.text, options.chunk_size, source)) {
                pieces.push_back(std::move(c.text));
            }
            break;
        }
        for (std::size_t i = 0; i < pieces.size(); ++i) {
            Document doc;
            doc.fields["text"] = std::move(pieces[i]);
            doc.fields["title"] = parsed.title.value_or("");
            doc.metadata["source"] = source;
            doc.metadata["chunk"] = std::to_string(i);
            result.documents.push_back(std::move(doc));
        }
    }
    result.documents = knowledge_preprocess(std::move(result.documents), options.rules, "text");
    for (std::size_t i = 0; i < result.documents.size(); ++i) {
        result.documents[i].doc_id = i;
    }
    return result;
}

PreprocessResult preprocess_directory(const std::filesystem::path &dir, const PreprocessOptions &options)
{
    if (!std::filesystem::is_directory(dir)) {
        throw InvalidArgument("not a directory: " + dir.string());
    }
    std::vector<std::filesystem::path> files;
    for (const auto &e : std::filesystem::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) {
            files.push_back(e.path());
        }
    }
    std::sort(files.begin(), files.end());
    return preprocess_files(files, dir, options);
}

} // namespace flexkit
