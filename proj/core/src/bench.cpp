#include "flexkit/bench.hpp"

#include "flexkit/errors.hpp"
#include "flexkit/hashing.hpp"
#include "flexkit/retriever.hpp"

#include <sys/resource.h>
#include <unistd.h>

#include <condition_variable>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

namespace flexkit {

std::uint64_t current_rss_bytes()
{
    std::ifstream statm("/proc/self/statm");
    std::uint64_t size = 0;
    std::uint64_t resident = 0;
    if (!(statm >> size >> resident)) {
        return 0;
    }
    return resident * static_cast<std::uint64_t>(::sysconf(_SC_PAGESIZE));
}

std::uint64_t peak_rss_bytes()
{
    rusage usage{};
    if (::getrusage(RUSAGE_SELF, &usage) != 0) {
        return 0;
    }
    return static_cast<std::uint64_t>(usage.ru_maxrss) * 1024; // kilobytes on Linux
}

double process_cpu_seconds()
{
    rusage usage{};
    if (::getrusage(RUSAGE_SELF, &usage) != 0) {
        return 0.0;
    }
    auto seconds = [](const timeval &tv) { return static_cast<double>(tv.tv_sec) + static_cast<double>(tv.tv_usec) / 1e6; };
    return seconds(usage.ru_utime) + seconds(usage.ru_stime);
}

std::string digest_results(std::span<const std::vector<RetrievedContext>> results)
{
    Hasher128 h;
    for (const auto &list : results) {
        h.field(std::to_string(list.size()));
        for (const auto &ctx : list) {
            char buf[8];
            std::memcpy(buf, &ctx.fused_score, sizeof buf);
            h.field(std::to_string(ctx.doc_id));
            h.field(std::string_view(buf, sizeof buf));
        }
    }
    return h.finish().hex();
}

namespace {

std::string digest_queries(std::span<const std::string> queries)
{
    Hasher128 h;
    for (const auto &q : queries) {
        h.field(q);
    }
    return h.finish().hex();
}

class MemorySampler {
public:
    explicit MemorySampler(std::chrono::milliseconds interval)
    {
        sample();
        thread_ = std::jthread([this, interval](std::stop_token stop) {
            std::mutex m;
            std::condition_variable_any cv;
            std::unique_lock lock(m);
            while (!stop.stop_requested()) {
                cv.wait_for(lock, stop, interval, [] { return false; });
                if (!stop.stop_requested()) {
                    sample();
                }
            }
        });
    }

    /// Stops the thread and takes a final reading.
    void stop()
    {
        thread_.request_stop();
        thread_.join();
        sample();
    }

    [[nodiscard]] std::uint64_t average() const { return count_ ? static_cast<std::uint64_t>(sum_ / static_cast<double>(count_)) : 0; }
    [[nodiscard]] std::uint64_t peak() const noexcept { return peak_; }
    [[nodiscard]] std::size_t count() const noexcept { return count_; }

private:
    void sample()
    {
        const auto rss = current_rss_bytes();
        std::lock_guard lock(mutex_);
        sum_ += static_cast<double>(rss);
        ++count_;
        peak_ = std::max(peak_, rss);
    }

    std::mutex mutex_;
    double sum_ = 0.0;
    std::size_t count_ = 0;
    std::uint64_t peak_ = 0;
    std::jthread thread_;
};

std::string format_ratio(const std::optional<double> &r)
{
    if (!r) {
        return "n/a";
    }
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(3) << *r;
    return ss.str();
}

} // namespace

ResourceReport run_bench(const Retriever &retriever, std::span<const std::string> queries, const BenchOptions &options,
                         std::vector<std::vector<RetrievedContext>> *results_out)
{
    if (queries.empty()) {
        throw InvalidArgument("bench needs at least one query");
    }
    if (options.batch_size < 1) {
        throw InvalidArgument("batch_size must be >= 1");
    }
    ResourceReport report;
    report.batch_size = options.batch_size;
    report.k = options.k == 0 ? retriever.config().final_k : options.k;
    if (report.k > retriever.config().retrieve_k) {
        throw InvalidArgument("bench k (" + std::to_string(report.k) + ") exceeds retrieve_k (" +
                              std::to_string(retriever.config().retrieve_k) + ")");
    }
    report.tokenizer_parallel = options.tokenizer_parallel;
    report.fingerprint = retriever.fingerprint().hex();
    report.query_digest = digest_queries(queries);

    std::vector<std::vector<RetrievedContext>> results;
    results.reserve(queries.size());
    const BatchOptions batch{.concurrency = options.batch_size, .tokenizer_parallel = options.tokenizer_parallel};

    MemorySampler sampler(options.sample_interval);
    const double cpu_start = process_cpu_seconds();
    const auto wall_start = std::chrono::steady_clock::now();
    try {
        for (std::size_t begin = 0; begin < queries.size(); begin += options.batch_size) {
            const auto n = std::min(options.batch_size, queries.size() - begin);
            auto part = retriever.retrieve_batch(queries.subspan(begin, n), report.k, batch);
            for (auto &r : part) {
                results.push_back(std::move(r));
            }
        }
    } catch (const BatchError &e) {
        report.valid = false;
        report.error = e.what();
    }
    const auto wall = std::chrono::steady_clock::now() - wall_start;
    report.total_cpu_time_s = process_cpu_seconds() - cpu_start;
    sampler.stop();

    report.query_count = results.size();
    if (report.query_count > 0) {
        report.avg_wall_clock_ms_per_query =
            std::chrono::duration<double, std::milli>(wall).count() / static_cast<double>(report.query_count);
    }
    report.memory_samples = sampler.count();
    report.avg_memory_bytes = sampler.average();
    report.peak_memory_bytes = std::max(sampler.peak(), peak_rss_bytes());
    report.results_digest = digest_results(results);
    if (results_out != nullptr) {
        *results_out = std::move(results);
    }
    return report;
}

nlohmann::json ResourceReport::to_json() const
{
    nlohmann::json j;
    j["avg_wall_clock_ms_per_query"] = avg_wall_clock_ms_per_query;
    j["total_cpu_time_s"] = total_cpu_time_s;
    j["avg_memory_bytes"] = avg_memory_bytes;
    j["peak_memory_bytes"] = peak_memory_bytes;
    j["batch_size"] = batch_size;
    j["query_count"] = query_count;
    j["fingerprint"] = fingerprint;
    j["k"] = k;
    j["tokenizer_parallel"] = tokenizer_parallel;
    j["memory_samples"] = memory_samples;
    j["query_digest"] = query_digest;
    j["results_digest"] = results_digest;
    j["valid"] = valid;
    if (!error.empty()) {
        j["error"] = error;
    }
    return j;
}

ResourceReport ResourceReport::from_json(const nlohmann::json &j)
{
    ResourceReport r;
    try {
        r.avg_wall_clock_ms_per_query = j.at("avg_wall_clock_ms_per_query").get<double>();
        r.total_cpu_time_s = j.at("total_cpu_time_s").get<double>();
        r.avg_memory_bytes = j.at("avg_memory_bytes").get<std::uint64_t>();
        r.peak_memory_bytes = j.at("peak_memory_bytes").get<std::uint64_t>();
        r.batch_size = j.at("batch_size").get<std::size_t>();
        r.query_count = j.at("query_count").get<std::size_t>();
        r.fingerprint = j.at("fingerprint").get<std::string>();
        r.k = j.value("k", std::size_t{0});
        r.tokenizer_parallel = j.value("tokenizer_parallel", true);
        r.memory_samples = j.value("memory_samples", std::size_t{0});
        r.query_digest = j.value("query_digest", std::string());
        r.results_digest = j.value("results_digest", std::string());
        r.valid = j.value("valid", true);
        r.error = j.value("error", std::string());
    } catch (const nlohmann::json::exception &e) {
        throw FormatError(std::string("malformed resource report: ") + e.what());
    }
    return r;
}

ReportComparison compare_reports(const ResourceReport &a, const ResourceReport &b)
{
    if (a.query_digest != b.query_digest || a.query_count != b.query_count) {
        throw InvalidArgument("reports were produced from different query sets");
    }
    if (a.batch_size != b.batch_size) {
        throw InvalidArgument("reports use different batch sizes (" + std::to_string(a.batch_size) + " vs " +
                              std::to_string(b.batch_size) + ")");
    }
    const std::pair<const char *, std::pair<double, double>> metrics[] = {
        {"avg_wall_clock_ms_per_query", {a.avg_wall_clock_ms_per_query, b.avg_wall_clock_ms_per_query}},
        {"total_cpu_time_s", {a.total_cpu_time_s, b.total_cpu_time_s}},
        {"avg_memory_bytes", {static_cast<double>(a.avg_memory_bytes), static_cast<double>(b.avg_memory_bytes)}},
        {"peak_memory_bytes", {static_cast<double>(a.peak_memory_bytes), static_cast<double>(b.peak_memory_bytes)}},
    };
    ReportComparison cmp;
    std::ostringstream md;
    md << "| metric | a | b | a/b |\n|---|---:|---:|---:|\n";
    for (const auto &[name, values] : metrics) {
        const auto [va, vb] = values;
        std::optional<double> ratio;
        if (vb != 0.0) {
            ratio = va / vb;
        } else if (va == 0.0) {
            ratio = 1.0;
        }
        cmp.ratios[name] = ratio;
        md << "| " << name << " | " << va << " | " << vb << " | " << format_ratio(ratio) << " |\n";
    }
    cmp.markdown = md.str();
    return cmp;
}

nlohmann::json ReportComparison::to_json() const
{
    nlohmann::json j = nlohmann::json::object();
    for (const auto &[name, r] : ratios) {
        j[name] = r ? nlohmann::json(*r) : nlohmann::json(nullptr);
    }
    return j;
}

} // namespace flexkit
