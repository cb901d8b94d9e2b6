#pragma once

// Web retrieval: a seeker locates pages, the downloader fetches them and the reader turns them into text.

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "flexkit/errors.hpp"
#include "flexkit/preprocess.hpp"

namespace flexkit {

struct SeekResult {
    std::string url;
    std::optional<std::string> snippet;
    /// 1-based.
    std::size_t rank = 0;

    friend bool operator==(const SeekResult &, const SeekResult &) = default;
};

class WebSeeker {
public:
    virtual ~WebSeeker() = default;
    /// At most k results, duplicates removed (first occurrence kept), ranks 1..n.
    [[nodiscard]] virtual std::vector<SeekResult> seek(std::string_view query, std::size_t k) const = 0;
};

/// Query to URL list mapping, usually loaded from a JSON file: {"query": ["url", ...]}.
class FixtureSeeker final : public WebSeeker {
public:
    explicit FixtureSeeker(const nlohmann::json &mapping);
    [[nodiscard]] static FixtureSeeker from_file(const std::filesystem::path &path);

    [[nodiscard]] std::vector<SeekResult> seek(std::string_view query, std::size_t k) const override;

private:
    std::map<std::string, std::vector<std::string>, std::less<>> mapping_;
};

/// GET <endpoint>?<query_param>=...&<limit_param>=k against a JSON search API.
///
/// generic:    {"results": [{"url": "...", "snippet": "..."}, ...]}
/// opensearch: ["query", [titles], [descriptions], [urls]] (MediaWiki style)
class SearchApiSeeker final : public WebSeeker {
public:
    enum class Format { generic, opensearch };

    struct Options {
        std::string endpoint;
        Format format = Format::generic;
        std::string query_param = "q";
        std::string limit_param = "limit";
        /// Extra fixed query parameters, e.g. {"action": "opensearch"}.
        std::map<std::string, std::string> params;
        std::chrono::milliseconds timeout{10000};
        int attempts = 3;
    };

    explicit SearchApiSeeker(Options options);
    [[nodiscard]] std::vector<SeekResult> seek(std::string_view query, std::size_t k) const override;

private:
    Options options_;
};

/// Loads a seeker description: {"type": "api", "endpoint": ...} or a plain fixture mapping.
[[nodiscard]] std::unique_ptr<WebSeeker> load_seeker(const std::filesystem::path &path);

/// Keeps the first occurrence of each URL and renumbers ranks.
[[nodiscard]] std::vector<SeekResult> dedupe_seek_results(std::vector<SeekResult> results, std::size_t k);

struct WebResource {
    /// Final URL after redirects.
    std::string url;
    int status_code = 0;
    std::string content_type;
    /// Empty unless the status is 2xx.
    std::string body;
    std::chrono::system_clock::time_point fetched_at;
    /// "truncated" = "true" when the body hit max_bytes; "redirects" = count; "requested_url".
    std::map<std::string, std::string> metadata;

    [[nodiscard]] bool ok() const noexcept { return status_code >= 200 && status_code < 300; }
    [[nodiscard]] bool truncated() const;
};

struct DownloadPolicy {
    std::chrono::milliseconds timeout{10000};
    /// Total tries for 5xx, 408, 429 and transport failures.
    int attempts = 3;
    std::chrono::milliseconds base_backoff{200};
    /// 0 means unlimited.
    std::size_t max_bytes = 5u << 20;
    /// Requests per second per host; 0 means unlimited.
    double rate_per_host = 1.0;
    int max_redirects = 5;
    bool respect_robots = true;
    std::string user_agent = "flexkit";
};

class RobotsDisallowed : public IoError {
public:
    using IoError::IoError;
};

/// Parsed robots.txt rules for one user agent.
class RobotsRules {
public:
    RobotsRules() = default;
    [[nodiscard]] static RobotsRules parse(std::string_view text, std::string_view user_agent);
    /// Longest matching Allow/Disallow prefix decides; Allow wins ties.
    [[nodiscard]] bool allowed(std::string_view path) const;

private:
    std::vector<std::pair<std::string, bool>> rules_; // prefix, allow
};

class Downloader {
public:
    explicit Downloader(DownloadPolicy policy = {});
    ~Downloader();
    Downloader(const Downloader &) = delete;
    Downloader &operator=(const Downloader &) = delete;

    /// Non-2xx final statuses come back as a resource with an empty body. Transport failures
    /// after all attempts, redirect loops, robots exclusions and bad schemes throw.
    [[nodiscard]] WebResource download(std::string_view url) const;

    /// Start times of every request sent to `host` ("host:port"), in order.
    [[nodiscard]] std::vector<std::chrono::steady_clock::time_point> request_times(std::string_view host) const;
    [[nodiscard]] const DownloadPolicy &policy() const noexcept { return policy_; }

private:
    struct HostState;
    [[nodiscard]] HostState &host_state(const std::string &host) const;

    DownloadPolicy policy_;
    mutable std::mutex hosts_mutex_;
    mutable std::map<std::string, std::unique_ptr<HostState>> hosts_;
};

/// html and text/* bodies only. The title comes from <title> or a leading markdown heading.
[[nodiscard]] ParsedDocument read_web(const WebResource &resource);

struct WebContext {
    std::string url;
    std::optional<std::string> title;
    std::string text;
    /// Position among successful results, 1-based.
    std::size_t rank = 0;
    std::size_t seek_rank = 0;

    friend bool operator==(const WebContext &, const WebContext &) = default;
};

struct WebFailure {
    std::string url;
    std::string error;
};

struct WebRetrieveResult {
    std::vector<WebContext> contexts;
    std::vector<WebFailure> failures;
};

struct WebRetrieveOptions {
    std::size_t concurrency = 4;
};

/// Seek, download in parallel, read. Failed pages are skipped and logged; successes keep seek order.
[[nodiscard]] WebRetrieveResult web_retrieve(std::string_view query, std::size_t k, const WebSeeker &seeker,
                                             const Downloader &downloader, const WebRetrieveOptions &options = {});

[[nodiscard]] nlohmann::json to_json(const WebContext &ctx);

} // namespace flexkit
