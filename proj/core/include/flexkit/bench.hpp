#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "flexkit/context.hpp"

namespace flexkit {

class Retriever;

struct ResourceReport {
    double avg_wall_clock_ms_per_query = 0.0;
    double total_cpu_time_s = 0.0;
    std::uint64_t avg_memory_bytes = 0;
    std::uint64_t peak_memory_bytes = 0;
    std::size_t batch_size = 1;
    std::size_t query_count = 0;
    std::string fingerprint;

    std::size_t k = 0;
    bool tokenizer_parallel = true;
    std::size_t memory_samples = 0;
    /// Hash of the query list, used to refuse comparisons across different workloads.
    std::string query_digest;
    /// Hash of all retrieved (doc id, fused score) pairs.
    std::string results_digest;
    /// False when a retrieval failed part way; the other fields then cover the completed part.
    bool valid = true;
    std::string error;

    [[nodiscard]] nlohmann::json to_json() const;
    [[nodiscard]] static ResourceReport from_json(const nlohmann::json &j);
    friend bool operator==(const ResourceReport &, const ResourceReport &) = default;
};

struct BenchOptions {
    std::size_t batch_size = 1;
    std::chrono::milliseconds sample_interval{50};
    bool tokenizer_parallel = true;
    /// 0 means the retriever's final_k.
    std::size_t k = 0;
};

/// Resident set size of this process in bytes (0 when unavailable).
[[nodiscard]] std::uint64_t current_rss_bytes();
/// OS high-water mark of the resident set in bytes (0 when unavailable).
[[nodiscard]] std::uint64_t peak_rss_bytes();
/// User plus system CPU time of this process in seconds.
[[nodiscard]] double process_cpu_seconds();

[[nodiscard]] std::string digest_results(std::span<const std::vector<RetrievedContext>> results);

/// Runs retrieve_batch over consecutive batches of batch_size queries (concurrency = batch_size)
/// while sampling memory in the background. The cache is not involved.
[[nodiscard]] ResourceReport run_bench(const Retriever &retriever, std::span<const std::string> queries,
                                       const BenchOptions &options,
                                       std::vector<std::vector<RetrievedContext>> *results_out = nullptr);

struct ReportComparison {
    /// a / b per metric; nullopt when b is 0 and a is not.
    std::map<std::string, std::optional<double>> ratios;
    std::string markdown;
    [[nodiscard]] nlohmann::json to_json() const;
};

/// Throws InvalidArgument when the reports were produced from different query sets or batch sizes.
[[nodiscard]] ReportComparison compare_reports(const ResourceReport &a, const ResourceReport &b);

} // namespace flexkit
