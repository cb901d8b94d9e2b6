#pragma once

#include <cstddef>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "flexkit/context.hpp"
#include "flexkit/hashing.hpp"

namespace flexkit {

class Retriever;

/// NFC, trimmed, internal whitespace runs collapsed to one space. Case is kept.
[[nodiscard]] std::string normalize_query(std::string_view query);

/// Persistent LRU cache of retrieval results.
///
/// Layout: <dir>/ab/cd/<key hex>.json per entry, <dir>/manifest listing keys
/// from least to most recently used. The manifest is replaced atomically and
/// updates serialize on an advisory lock, so several processes may share a directory.
class QueryCache {
public:
    static constexpr std::size_t kDefaultCapacity = 10000;

    /// Creates the directory if needed and reconciles it with the manifest.
    explicit QueryCache(std::filesystem::path dir, std::size_t capacity = kDefaultCapacity);

    [[nodiscard]] static Digest128 make_key(const Digest128 &fingerprint, std::string_view query, std::size_t k);

    /// Hit refreshes recency. A corrupt entry is deleted and reported as a miss.
    [[nodiscard]] std::optional<std::vector<RetrievedContext>> get(const Digest128 &key);
    /// Inserts or replaces, evicting least recently used entries beyond capacity.
    void put(const Digest128 &key, const std::vector<RetrievedContext> &results);

    [[nodiscard]] bool contains(const Digest128 &key) const;
    /// Keys from least to most recently used.
    [[nodiscard]] std::vector<Digest128> keys() const;
    [[nodiscard]] std::size_t size() const;
    [[nodiscard]] std::size_t capacity() const noexcept { return capacity_; }
    [[nodiscard]] const std::filesystem::path &dir() const noexcept { return dir_; }
    [[nodiscard]] std::filesystem::path entry_path(const Digest128 &key) const;
    void clear();

private:
    class Lock;

    [[nodiscard]] std::vector<std::string> load_manifest() const;
    void store_manifest(const std::vector<std::string> &keys) const;
    void evict(std::vector<std::string> &keys) const;
    void reconcile();

    std::filesystem::path dir_;
    std::size_t capacity_;
    mutable std::mutex mutex_;
};

/// Returns (results, hit). A hit touches no index.
[[nodiscard]] std::pair<std::vector<RetrievedContext>, bool> cached_retrieve(QueryCache &cache,
                                                                            const Retriever &retriever,
                                                                            std::string_view query, std::size_t k);

} // namespace flexkit
