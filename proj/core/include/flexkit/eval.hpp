#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "flexkit/context.hpp"
#include "flexkit/refine.hpp"
#include "flexkit/retriever.hpp"

namespace flexkit {

/// SQuAD answer normalization: Unicode lowercase, drop ASCII punctuation, drop the articles a/an/the, collapse whitespace.
[[nodiscard]] std::string normalize_answer(std::string_view s);

/// 1 iff the normalized prediction equals some normalized gold. Throws on an empty gold list.
[[nodiscard]] int exact_match(std::string_view prediction, std::span<const std::string> golds);
/// Max over golds of token-multiset F1 on normalized strings.
[[nodiscard]] double token_f1(std::string_view prediction, std::span<const std::string> golds);

/// 1 iff some normalized gold is a substring of some normalized text among the first k.
/// Golds that normalize to nothing are ignored.
[[nodiscard]] int success_rate(std::span<const std::string> context_texts, std::span<const std::string> golds,
                               std::size_t k);
[[nodiscard]] int success_rate(std::span<const RetrievedContext> contexts, std::span<const std::string> golds,
                               std::size_t k);

struct QaExample {
    std::string id;
    std::string question;
    std::vector<std::string> answers;
};

/// Line-delimited {"id", "question", "answers": [...]}. Numeric ids are accepted and stringified.
[[nodiscard]] std::vector<QaExample> load_dataset(const std::filesystem::path &path);
[[nodiscard]] std::vector<QaExample> parse_dataset(std::istream &in);
/// Line-delimited {"id", "prediction"}.
[[nodiscard]] std::map<std::string, std::string> load_predictions(const std::filesystem::path &path);

struct ExampleScores {
    std::string id;
    std::optional<double> f1;
    std::optional<int> em;
    std::optional<int> succ;
    /// Fraction of distinct gold answers found in the top-k.
    std::optional<double> recall;
    /// Rank of the first context containing a gold answer.
    std::optional<std::size_t> hit_rank;
    std::optional<std::string> prediction;
};

struct EvalReport {
    std::string kind; // "retrieval", "generation" or "rag"
    std::vector<ExampleScores> examples;
    /// f1, em, succ, recall (percentages) and mrr (x100), depending on kind.
    std::map<std::string, double> aggregates;
    std::string fingerprint;
    std::size_t k = 0;
    std::optional<double> elapsed_ms;

    /// Timing is omitted unless asked for, so reports compare byte for byte.
    [[nodiscard]] nlohmann::json to_json(bool include_timing = false) const;
    [[nodiscard]] static EvalReport from_json(const nlohmann::json &j);
    [[nodiscard]] std::string table() const;
};

/// Fills aggregates from per-example values, in example order.
void compute_aggregates(EvalReport &report);

[[nodiscard]] EvalReport evaluate_retrieval(const Retriever &retriever, std::span<const QaExample> dataset,
                                            std::size_t k, const BatchOptions &batch = {});
[[nodiscard]] EvalReport evaluate_generation(const std::map<std::string, std::string> &predictions,
                                             std::span<const QaExample> dataset);

/// Produces an answer from the question and the refined contexts.
using Generator = std::function<std::string(const QaExample &, const std::vector<RetrievedContext> &)>;

/// Retrieve, refine, generate, then score both retrieval (Succ over the unrefined top-k) and generation.
[[nodiscard]] EvalReport evaluate_rag(const Retriever &retriever, std::span<const QaExample> dataset, std::size_t k,
                                      const RefineConfig &refine_config, const Generator &generate,
                                      const BatchOptions &batch = {});

} // namespace flexkit
