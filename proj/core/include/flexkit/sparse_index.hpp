#pragma once

// BM25 inverted index over a single document field.
//
// File layout (little-endian, "FSI1"):
//   header: magic, version u32, flags u32, N u64, avgdl f64, k1 f64, b f64, vocab u64,
//           postings u64, build_id[16], then section offsets (terms, directory, doc ids,
//           term freqs, doc lengths) as u64
//   terms:      concatenated UTF-8 term bytes, sorted
//   directory:  per term {term offset u64, term length u32, df u32, first posting u64}
//   doc ids:    u32 per posting, ascending within each term
//   term freqs: u32 per posting, parallel to doc ids
//   doc lengths: u32 per document

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "flexkit/corpus_store.hpp"
#include "flexkit/hashing.hpp"
#include "flexkit/mapped_file.hpp"
#include "flexkit/search_types.hpp"
#include "flexkit/tokenizer.hpp"

namespace flexkit {

struct Bm25Params {
    double k1 = 1.5;
    double b = 0.75;

    void validate() const;
    friend bool operator==(const Bm25Params &, const Bm25Params &) = default;
};

/// Lucene-style idf: ln(1 + (N - df + 0.5) / (df + 0.5)). Never negative.
[[nodiscard]] double bm25_idf(std::uint64_t n_docs, std::uint64_t df) noexcept;

/// Single-term contribution for one document.
[[nodiscard]] double bm25_term_score(double idf, double tf, double doc_len, double avgdl, const Bm25Params &p) noexcept;

struct SparseBuildOptions {
    Bm25Params params;
    AnalyzerOptions analyzer;
    /// Mixed into the build id; a different seed yields a different id over identical content.
    std::uint64_t build_seed = 0;
};

/// Accumulates documents in doc-id order and writes an index file.
class Bm25Builder {
public:
    explicit Bm25Builder(SparseBuildOptions options = {});

    void add(std::string_view text);
    [[nodiscard]] std::uint64_t size() const noexcept { return doc_lengths_.size(); }
    /// Writes the index and returns its build id.
    Digest128 write(const std::filesystem::path &path) const;

private:
    SparseBuildOptions options_;
    std::vector<std::uint32_t> doc_lengths_;
    // term -> (doc id, tf), doc ids appended in ascending order
    std::map<std::string, std::vector<std::pair<std::uint32_t, std::uint32_t>>, std::less<>> postings_;
};

/// Builds an index over `field` of every document in the store.
Digest128 build_sparse_index(const StoreReader &store, std::string_view field, const std::filesystem::path &out,
                             const SparseBuildOptions &options = {});

struct PostingView {
    std::span<const std::byte> doc_ids; // u32 LE
    std::span<const std::byte> term_freqs;
    [[nodiscard]] std::size_t size() const noexcept { return doc_ids.size() / 4; }
    [[nodiscard]] std::uint32_t doc(std::size_t i) const noexcept;
    [[nodiscard]] std::uint32_t tf(std::size_t i) const noexcept;
};

class Bm25Index {
public:
    explicit Bm25Index(const std::filesystem::path &path);

    [[nodiscard]] std::vector<SearchHit> search(std::string_view query, std::size_t k) const;
    /// Search with already-analyzed query terms (deduplicated internally).
    [[nodiscard]] std::vector<SearchHit> search_terms(std::vector<std::string> terms, std::size_t k) const;

    [[nodiscard]] std::vector<std::string> analyze_query(std::string_view query) const;

    [[nodiscard]] std::uint64_t num_docs() const noexcept { return n_docs_; }
    [[nodiscard]] double avgdl() const noexcept { return avgdl_; }
    [[nodiscard]] const Bm25Params &params() const noexcept { return params_; }
    [[nodiscard]] const AnalyzerOptions &analyzer() const noexcept { return analyzer_; }
    [[nodiscard]] std::uint64_t vocabulary_size() const noexcept { return vocab_size_; }
    [[nodiscard]] const Digest128 &build_id() const noexcept { return build_id_; }
    [[nodiscard]] std::uint32_t doc_length(DocId id) const;

    /// Document frequency, 0 for unknown terms.
    [[nodiscard]] std::uint32_t df(std::string_view term) const;
    [[nodiscard]] PostingView postings(std::string_view term) const;
    [[nodiscard]] std::string term(std::uint64_t term_id) const;

private:
    [[nodiscard]] std::int64_t find_term(std::string_view term) const;
    [[nodiscard]] std::string_view term_view(std::uint64_t term_id) const;
    [[nodiscard]] PostingView postings_of(std::uint64_t term_id) const;

    MappedFile file_;
    std::uint64_t n_docs_ = 0;
    double avgdl_ = 0.0;
    Bm25Params params_;
    AnalyzerOptions analyzer_;
    std::uint64_t vocab_size_ = 0;
    std::uint64_t total_postings_ = 0;
    Digest128 build_id_;
    std::uint64_t terms_off_ = 0;
    std::uint64_t dir_off_ = 0;
    std::uint64_t docids_off_ = 0;
    std::uint64_t tfs_off_ = 0;
    std::uint64_t doclen_off_ = 0;
};

} // namespace flexkit
