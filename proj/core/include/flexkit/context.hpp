#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "flexkit/corpus_store.hpp"

namespace flexkit {

/// One retrieval hit as handed to refiners, evaluators and callers.
struct RetrievedContext {
    DocId doc_id = 0;
    /// Raw score from every index that returned this document, keyed by index name.
    std::map<std::string, double> per_index_scores;
    double fused_score = 0.0;
    /// 1-based.
    std::size_t rank = 0;
    /// Names of the indexes that returned this document.
    std::set<std::string> sources;
    /// Document text (fields joined by newlines) when a store is attached.
    std::string text;

    friend bool operator==(const RetrievedContext &, const RetrievedContext &) = default;
};

[[nodiscard]] nlohmann::json to_json(const RetrievedContext &ctx);
[[nodiscard]] RetrievedContext context_from_json(const nlohmann::json &j);
[[nodiscard]] nlohmann::json to_json(const std::vector<RetrievedContext> &contexts);
[[nodiscard]] std::vector<RetrievedContext> contexts_from_json(const nlohmann::json &j);

/// Rewrites ranks to 1..n in current order.
void assign_ranks(std::vector<RetrievedContext> &contexts) noexcept;

} // namespace flexkit
