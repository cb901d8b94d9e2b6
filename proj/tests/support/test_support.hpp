#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "flexkit/corpus_store.hpp"
#include "flexkit/retriever_config.hpp"

namespace flexkit::testing {

/// Directory under $TMPDIR removed on destruction.
class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir &) = delete;
    TempDir &operator=(const TempDir &) = delete;

    [[nodiscard]] const std::filesystem::path &path() const noexcept { return path_; }
    [[nodiscard]] std::filesystem::path operator/(std::string_view name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

void write_file(const std::filesystem::path &path, std::string_view bytes);
[[nodiscard]] std::string read_file(const std::filesystem::path &path);

/// Root of the checked-in test data.
[[nodiscard]] std::filesystem::path data_dir();

/// Zipf-ish synthetic text corpus; vocabulary "w0".."w{vocab-1}".
[[nodiscard]] std::vector<std::string> synthetic_corpus(std::size_t docs, std::size_t vocab, std::size_t min_len,
                                                        std::size_t max_len, std::uint64_t seed);

/// Writes documents with a single "text" field.
void write_text_store(const std::filesystem::path &path, const std::vector<std::string> &texts);

/// n points of dimension dim around `clusters` Gaussian centres.
[[nodiscard]] std::vector<float> clustered_vectors(std::size_t n, std::size_t dim, std::size_t clusters,
                                                   float spread, std::uint64_t seed);

/// On-disk store plus a BM25 index ("bm25") and a flat index ("dense", hashed encoder) over
/// `texts` in `dir`. The returned config fuses both with RRF.
[[nodiscard]] RetrieverConfig build_pipeline(const std::filesystem::path &dir, const std::vector<std::string> &texts,
                                             int dimension = 64, std::uint64_t seed = 7);

} // namespace flexkit::testing
