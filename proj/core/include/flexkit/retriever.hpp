#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "flexkit/context.hpp"
#include "flexkit/errors.hpp"
#include "flexkit/hashing.hpp"
#include "flexkit/retriever_config.hpp"
#include "flexkit/search_types.hpp"

namespace flexkit {

class StoreReader;
class Bm25Index;
class DenseIndex;
class Encoder;
class RemoteSearchClient;

/// One index's ranked candidates as input to fusion.
struct RankedList {
    std::string name;
    double weight = 1.0;
    std::vector<SearchHit> hits; // rank order
};

/// Min-max normalizes each list (a constant list maps to 1.0) and sums weighted scores; absent docs add 0.
[[nodiscard]] std::vector<RetrievedContext> fuse_weighted_sum(std::span<const RankedList> lists, std::size_t k);
/// Sum of 1/(c + rank) over the lists containing each doc.
[[nodiscard]] std::vector<RetrievedContext> fuse_rrf(std::span<const RankedList> lists, int c, std::size_t k);

/// Token-overlap F1 between two token multisets.
[[nodiscard]] double overlap_f1(std::span<const std::string> a, std::span<const std::string> b);

/// Re-scores contexts by overlap F1 against the query, stable-sorts descending, keeps top_n.
/// The rerank score replaces fused_score so that scores stay non-increasing with rank.
[[nodiscard]] std::vector<RetrievedContext> rerank_lexical(std::string_view query,
                                                           std::vector<RetrievedContext> contexts, std::size_t top_n);

/// Thrown by retrieve_batch; carries the position of the failing query.
class BatchError : public Error {
public:
    BatchError(std::size_t query_index, const std::string &what)
        : Error("query " + std::to_string(query_index) + ": " + what), query_index_(query_index)
    {
    }
    [[nodiscard]] std::size_t query_index() const noexcept { return query_index_; }

private:
    std::size_t query_index_;
};

struct BatchOptions {
    std::size_t concurrency = 4;
    /// When false, query analysis and encoding run on the calling thread before the parallel search.
    bool tokenizer_parallel = true;
};

class Retriever {
public:
    /// Opens every index (and the store, when configured). Validates dimensions and fields.
    explicit Retriever(RetrieverConfig config);
    ~Retriever();
    Retriever(const Retriever &) = delete;
    Retriever &operator=(const Retriever &) = delete;

    [[nodiscard]] const RetrieverConfig &config() const noexcept { return config_; }
    /// Hash of the canonical config, every index build id and the store identity.
    [[nodiscard]] const Digest128 &fingerprint() const noexcept { return fingerprint_; }
    [[nodiscard]] const StoreReader *store() const noexcept { return store_.get(); }

    /// Requires 1 <= k <= retrieve_k.
    [[nodiscard]] std::vector<RetrievedContext> retrieve(std::string_view query, std::size_t k) const;
    [[nodiscard]] std::vector<std::vector<RetrievedContext>> retrieve_batch(std::span<const std::string> queries,
                                                                            std::size_t k,
                                                                            const BatchOptions &options = {}) const;

    /// Per-index candidate lists before fusion.
    [[nodiscard]] std::vector<RankedList> candidates(std::string_view query) const;

    /// Number of individual index searches performed so far.
    [[nodiscard]] std::uint64_t index_probes() const noexcept { return probes_.load(std::memory_order_relaxed); }
    void reset_index_probes() noexcept { probes_.store(0, std::memory_order_relaxed); }

private:
    struct Prepared;
    struct Slot;

    [[nodiscard]] Prepared prepare(std::string_view query) const;
    [[nodiscard]] std::vector<RankedList> search(const Prepared &prepared) const;
    [[nodiscard]] std::vector<RetrievedContext> finish(const Prepared &prepared, std::vector<RankedList> lists,
                                                       std::size_t k) const;

    RetrieverConfig config_;
    std::vector<std::unique_ptr<Slot>> slots_;
    std::unique_ptr<Encoder> encoder_;
    std::unique_ptr<StoreReader> store_;
    Digest128 fingerprint_;
    mutable std::atomic<std::uint64_t> probes_{0};
};

} // namespace flexkit
