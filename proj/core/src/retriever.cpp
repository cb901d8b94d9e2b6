#include "flexkit/retriever.hpp"

#include "flexkit/corpus_store.hpp"
#include "flexkit/dense_index.hpp"
#include "flexkit/encoder.hpp"
#include "flexkit/remote_search.hpp"
#include "flexkit/sparse_index.hpp"
#include "flexkit/tokenizer.hpp"

#include <algorithm>
#include <exception>
#include <map>
#include <mutex>
#include <optional>
#include <thread>
#include <unordered_map>

namespace flexkit {

namespace {

std::vector<RetrievedContext> top_contexts(std::map<DocId, RetrievedContext> merged, std::size_t k)
{
    std::vector<SearchHit> order;
    order.reserve(merged.size());
    for (const auto &[id, ctx] : merged) {
        order.push_back({id, ctx.fused_score});
    }
    keep_top_k(order, k);
    std::vector<RetrievedContext> out;
    out.reserve(order.size());
    for (const auto &hit : order) {
        out.push_back(std::move(merged.at(hit.doc_id)));
    }
    assign_ranks(out);
    return out;
}

RetrievedContext &entry(std::map<DocId, RetrievedContext> &merged, DocId id)
{
    auto &ctx = merged[id];
    ctx.doc_id = id;
    return ctx;
}

} // namespace

std::vector<RetrievedContext> fuse_weighted_sum(std::span<const RankedList> lists, std::size_t k)
{
    std::map<DocId, RetrievedContext> merged;
    for (const auto &list : lists) {
        if (list.hits.empty()) {
            continue;
        }
        const auto [lo, hi] = std::minmax_element(list.hits.begin(), list.hits.end(),
                                                  [](const SearchHit &a, const SearchHit &b) { return a.score < b.score; });
        const double min = lo->score;
        const double range = hi->score - min;
        for (const auto &hit : list.hits) {
            const double norm = range > 0.0 ? (hit.score - min) / range : 1.0;
            auto &ctx = entry(merged, hit.doc_id);
            ctx.per_index_scores[list.name] = hit.score;
            ctx.sources.insert(list.name);
            ctx.fused_score += list.weight * norm;
        }
    }
    return top_contexts(std::move(merged), k);
}

std::vector<RetrievedContext> fuse_rrf(std::span<const RankedList> lists, int c, std::size_t k)
{
    if (c < 0) {
        throw InvalidArgument("rrf_c must be >= 0");
    }
    std::map<DocId, RetrievedContext> merged;
    for (const auto &list : lists) {
        for (std::size_t i = 0; i < list.hits.size(); ++i) {
            const auto &hit = list.hits[i];
            auto &ctx = entry(merged, hit.doc_id);
            ctx.per_index_scores[list.name] = hit.score;
            ctx.sources.insert(list.name);
            ctx.fused_score += 1.0 / static_cast<double>(c + static_cast<long long>(i) + 1);
        }
    }
    return top_contexts(std::move(merged), k);
}

double overlap_f1(std::span<const std::string> a, std::span<const std::string> b)
{
    if (a.empty() || b.empty()) {
        return 0.0;
    }
    std::unordered_map<std::string_view, std::size_t> counts;
    for (const auto &t : a) {
        ++counts[t];
    }
    std::size_t common = 0;
    for (const auto &t : b) {
        auto it = counts.find(t);
        if (it != counts.end() && it->second > 0) {
            --it->second;
            ++common;
        }
    }
    if (common == 0) {
        return 0.0;
    }
    const double p = static_cast<double>(common) / static_cast<double>(b.size());
    const double r = static_cast<double>(common) / static_cast<double>(a.size());
    return 2.0 * p * r / (p + r);
}

std::vector<RetrievedContext> rerank_lexical(std::string_view query, std::vector<RetrievedContext> contexts,
                                             std::size_t top_n)
{
    if (top_n > contexts.size()) {
        throw InvalidArgument("rerank top_n exceeds the number of contexts");
    }
    const auto q = tokenize(query);
    for (auto &ctx : contexts) {
        ctx.fused_score = overlap_f1(q, tokenize(ctx.text));
    }
    std::stable_sort(contexts.begin(), contexts.end(),
                     [](const RetrievedContext &a, const RetrievedContext &b) { return a.fused_score > b.fused_score; });
    contexts.resize(top_n);
    assign_ranks(contexts);
    return contexts;
}

// ---------------------------------------------------------------------------
// Retriever

struct Retriever::Slot {
    const IndexRef *ref = nullptr;
    std::unique_ptr<Bm25Index> sparse;
    std::unique_ptr<DenseIndex> dense;
    std::unique_ptr<RemoteSearchClient> remote;
};

struct Retriever::Prepared {
    std::string query;
    std::vector<std::vector<std::string>> terms; // per slot, sparse only
    std::optional<Embedding> embedding;
};

Retriever::Retriever(RetrieverConfig config) : config_(std::move(config))
{
    config_.validate();
    if (!config_.store.empty()) {
        store_ = std::make_unique<StoreReader>(config_.store);
        for (const auto &ix : config_.indexes) {
            if (!store_->has_field(ix.field)) {
                throw InvalidArgument("index '" + ix.name + "' refers to field '" + ix.field +
                                      "' which the store does not have");
            }
        }
    }
    if (config_.encoder) {
        encoder_ = make_encoder(*config_.encoder);
    }

    Hasher128 h;
    h.field("flexkit-retriever-v1");
    h.field(config_.to_json(false).dump());
    for (const auto &ix : config_.indexes) {
        auto slot = std::make_unique<Slot>();
        slot->ref = &ix;
        Digest128 id;
        switch (ix.type) {
        case IndexType::bm25:
            slot->sparse = std::make_unique<Bm25Index>(ix.path);
            id = slot->sparse->build_id();
            break;
        case IndexType::flat:
        case IndexType::ivfpq: {
            slot->dense = open_dense_index(ix.path);
            const bool ivf = slot->dense->kind() == DenseKind::ivfpq;
            if (ivf != (ix.type == IndexType::ivfpq)) {
                throw InvalidArgument("index '" + ix.name + "' is declared " + std::string(to_string(ix.type)) +
                                      " but the file holds a " + (ivf ? "ivfpq" : "flat") + " index");
            }
            if (encoder_->dimension() != slot->dense->dimension()) {
                throw InvalidArgument("encoder dimension " + std::to_string(encoder_->dimension()) +
                                      " does not match index '" + ix.name + "' dimension " +
                                      std::to_string(slot->dense->dimension()));
            }
            id = slot->dense->build_id();
            break;
        }
        case IndexType::remote:
            slot->remote = std::make_unique<RemoteSearchClient>(ix.endpoint);
            id = slot->remote->identity();
            break;
        }
        h.field(ix.name);
        h.field(id.hex());
        slots_.push_back(std::move(slot));
    }
    if (store_) {
        h.field("store");
        h.field(std::to_string(store_->size()));
        h.field(std::to_string(store_->file_size()));
        h.field(std::to_string(store_->checksum()));
    }
    fingerprint_ = h.finish();
}

Retriever::~Retriever() = default;

Retriever::Prepared Retriever::prepare(std::string_view query) const
{
    Prepared p;
    p.query = std::string(query);
    p.terms.resize(slots_.size());
    bool need_embedding = false;
    for (std::size_t i = 0; i < slots_.size(); ++i) {
        if (slots_[i]->sparse) {
            p.terms[i] = slots_[i]->sparse->analyze_query(query);
        }
        need_embedding = need_embedding || slots_[i]->dense != nullptr;
    }
    if (need_embedding) {
        p.embedding = encoder_->encode(query);
    }
    return p;
}

std::vector<RankedList> Retriever::search(const Prepared &prepared) const
{
    std::vector<RankedList> lists;
    lists.reserve(slots_.size());
    const std::size_t depth = config_.retrieve_k;
    for (std::size_t i = 0; i < slots_.size(); ++i) {
        const auto &slot = *slots_[i];
        RankedList list;
        list.name = slot.ref->name;
        list.weight = config_.weight(i);
        if (slot.sparse) {
            list.hits = slot.sparse->search_terms(prepared.terms[i], depth);
        } else if (slot.dense) {
            list.hits = slot.dense->search(prepared.embedding->values, std::min(depth, slot.dense->size()),
                                           slot.ref->nprobe);
        } else {
            list.hits = slot.remote->search(prepared.query, depth);
        }
        probes_.fetch_add(1, std::memory_order_relaxed);
        lists.push_back(std::move(list));
    }
    return lists;
}

std::vector<RankedList> Retriever::candidates(std::string_view query) const { return search(prepare(query)); }

std::vector<RetrievedContext> Retriever::finish(const Prepared &prepared, std::vector<RankedList> lists,
                                                std::size_t k) const
{
    const bool rerank = !config_.reranker.empty();
    const std::size_t fuse_k = rerank ? config_.retrieve_k : k;
    auto contexts = config_.fusion == Fusion::rrf ? fuse_rrf(lists, config_.rrf_c, fuse_k)
                                                  : fuse_weighted_sum(lists, fuse_k);
    if (store_) {
        for (auto &ctx : contexts) {
            ctx.text = store_->get(ctx.doc_id).joined_text();
        }
    }
    if (rerank) {
        contexts = rerank_lexical(prepared.query, std::move(contexts), std::min(k, contexts.size()));
    }
    return contexts;
}

std::vector<RetrievedContext> Retriever::retrieve(std::string_view query, std::size_t k) const
{
    if (k < 1 || k > config_.retrieve_k) {
        throw InvalidArgument("k must be in [1, retrieve_k=" + std::to_string(config_.retrieve_k) + "], got " +
                              std::to_string(k));
    }
    auto prepared = prepare(query);
    auto lists = search(prepared);
    return finish(prepared, std::move(lists), k);
}

std::vector<std::vector<RetrievedContext>> Retriever::retrieve_batch(std::span<const std::string> queries,
                                                                     std::size_t k, const BatchOptions &options) const
{
    if (options.concurrency < 1) {
        throw InvalidArgument("concurrency must be >= 1");
    }
    if (k < 1 || k > config_.retrieve_k) {
        throw InvalidArgument("k must be in [1, retrieve_k=" + std::to_string(config_.retrieve_k) + "]");
    }
    std::vector<std::vector<RetrievedContext>> results(queries.size());
    if (queries.empty()) {
        return results;
    }

    std::vector<std::optional<Prepared>> prepared(queries.size());
    std::mutex error_mutex;
    std::optional<std::size_t> failed_at;
    std::string failure;
    auto record_error = [&](std::size_t i, const std::exception &e) {
        std::lock_guard lock(error_mutex);
        if (!failed_at || i < *failed_at) {
            failed_at = i;
            failure = e.what();
        }
    };

    if (!options.tokenizer_parallel) {
        for (std::size_t i = 0; i < queries.size(); ++i) {
            try {
                prepared[i] = prepare(queries[i]);
            } catch (const std::exception &e) {
                record_error(i, e);
                break;
            }
        }
    }

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= queries.size()) {
                return;
            }
            {
                std::lock_guard lock(error_mutex);
                if (failed_at && *failed_at < i) {
                    return;
                }
            }
            try {
                if (!prepared[i]) {
                    prepared[i] = prepare(queries[i]);
                }
                auto lists = search(*prepared[i]);
                results[i] = finish(*prepared[i], std::move(lists), k);
            } catch (const std::exception &e) {
                record_error(i, e);
            }
        }
    };

    const std::size_t workers = std::min(options.concurrency, queries.size());
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back(worker);
        }
    }
    if (failed_at) {
        throw BatchError(*failed_at, failure);
    }
    return results;
}

} // namespace flexkit
