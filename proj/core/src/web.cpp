#include "flexkit/web.hpp"

#include "flexkit/http.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <fstream>
#include <set>
#include <thread>

namespace flexkit {

namespace {

std::string lower(std::string_view s)
{
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

std::string_view trim(std::string_view s)
{
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
        s.remove_prefix(1);
    }
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
        s.remove_suffix(1);
    }
    return s;
}

nlohmann::json read_json_file(const std::filesystem::path &path)
{
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception &e) {
        throw FormatError("malformed JSON in " + path.string() + ": " + e.what());
    }
}

bool is_redirect(int status) noexcept
{
    return status == 301 || status == 302 || status == 303 || status == 307 || status == 308;
}

std::string host_key(const http::Url &url) { return url.host + ":" + std::to_string(url.port); }

} // namespace

std::vector<SeekResult> dedupe_seek_results(std::vector<SeekResult> results, std::size_t k)
{
    std::set<std::string> seen;
    std::vector<SeekResult> out;
    for (auto &r : results) {
        if (out.size() == k) {
            break;
        }
        if (seen.insert(r.url).second) {
            r.rank = out.size() + 1;
            out.push_back(std::move(r));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Seekers

FixtureSeeker::FixtureSeeker(const nlohmann::json &mapping)
{
    if (!mapping.is_object()) {
        throw FormatError("seeker fixture must be a JSON object mapping query to URL list");
    }
    for (const auto &[query, urls] : mapping.items()) {
        try {
            mapping_.emplace(query, urls.get<std::vector<std::string>>());
        } catch (const nlohmann::json::exception &) {
            throw FormatError("seeker fixture entry '" + query + "' must be a list of URLs");
        }
    }
}

FixtureSeeker FixtureSeeker::from_file(const std::filesystem::path &path) { return FixtureSeeker(read_json_file(path)); }

std::vector<SeekResult> FixtureSeeker::seek(std::string_view query, std::size_t k) const
{
    if (k < 1) {
        throw InvalidArgument("seek k must be >= 1");
    }
    const auto it = mapping_.find(query);
    if (query.empty() || it == mapping_.end()) {
        return {};
    }
    std::vector<SeekResult> results;
    for (const auto &url : it->second) {
        results.push_back({url, std::nullopt, 0});
    }
    return dedupe_seek_results(std::move(results), k);
}

SearchApiSeeker::SearchApiSeeker(Options options) : options_(std::move(options))
{
    (void)http::parse_url(options_.endpoint);
}

std::vector<SeekResult> SearchApiSeeker::seek(std::string_view query, std::size_t k) const
{
    if (k < 1) {
        throw InvalidArgument("seek k must be >= 1");
    }
    if (trim(query).empty()) {
        return {};
    }
    std::string target = options_.endpoint;
    target += target.find('?') == std::string::npos ? '?' : '&';
    for (const auto &[name, value] : options_.params) {
        target += http::encode_query_component(name) + "=" + http::encode_query_component(value) + "&";
    }
    target += options_.query_param + "=" + http::encode_query_component(query);
    target += "&" + options_.limit_param + "=" + std::to_string(k);
    const auto url = http::parse_url(target);

    http::RequestOptions req;
    req.timeout = options_.timeout;
    const http::RetryPolicy policy{.attempts = options_.attempts};
    http::Response resp;
    for (int attempt = 1;; ++attempt) {
        try {
            resp = http::get(url, req);
            if (!http::is_retryable_status(resp.status) || attempt == options_.attempts) {
                break;
            }
        } catch (const http::TransportError &) {
            if (attempt == options_.attempts) {
                throw;
            }
        }
        std::this_thread::sleep_for(policy.backoff(attempt));
    }
    if (!resp.ok()) {
        throw IoError("search API " + options_.endpoint + " returned HTTP " + std::to_string(resp.status));
    }

    std::vector<SeekResult> results;
    try {
        const auto j = nlohmann::json::parse(resp.body);
        if (options_.format == Format::generic) {
            for (const auto &r : j.at("results")) {
                SeekResult s;
                s.url = r.at("url").get<std::string>();
                if (r.contains("snippet") && r.at("snippet").is_string()) {
                    s.snippet = r.at("snippet").get<std::string>();
                }
                results.push_back(std::move(s));
            }
        } else {
            const auto &descriptions = j.at(2);
            const auto &urls = j.at(3);
            for (std::size_t i = 0; i < urls.size(); ++i) {
                SeekResult s;
                s.url = urls.at(i).get<std::string>();
                if (i < descriptions.size() && descriptions.at(i).is_string() &&
                    !descriptions.at(i).get<std::string>().empty()) {
                    s.snippet = descriptions.at(i).get<std::string>();
                }
                results.push_back(std::move(s));
            }
        }
    } catch (const nlohmann::json::exception &e) {
        throw FormatError("malformed search API response from " + options_.endpoint + ": " + e.what());
    }
    return dedupe_seek_results(std::move(results), k);
}

std::unique_ptr<WebSeeker> load_seeker(const std::filesystem::path &path)
{
    const auto j = read_json_file(path);
    if (j.is_object() && j.contains("type") && j.at("type").is_string()) {
        if (j.at("type") != "api") {
            throw InvalidArgument("unknown seeker type '" + j.at("type").get<std::string>() + "'");
        }
        SearchApiSeeker::Options o;
        try {
            o.endpoint = j.at("endpoint").get<std::string>();
            const auto format = j.value("format", std::string("generic"));
            if (format == "opensearch") {
                o.format = SearchApiSeeker::Format::opensearch;
            } else if (format != "generic") {
                throw InvalidArgument("unknown search API format '" + format + "'");
            }
            o.query_param = j.value("query_param", o.query_param);
            o.limit_param = j.value("limit_param", o.limit_param);
            if (j.contains("params")) {
                o.params = j.at("params").get<std::map<std::string, std::string>>();
            }
            o.timeout = std::chrono::milliseconds(j.value("timeout_ms", o.timeout.count()));
            o.attempts = j.value("attempts", o.attempts);
        } catch (const nlohmann::json::exception &e) {
            throw FormatError("malformed seeker config " + path.string() + ": " + e.what());
        }
        return std::make_unique<SearchApiSeeker>(std::move(o));
    }
    return std::make_unique<FixtureSeeker>(j);
}

// ---------------------------------------------------------------------------
// robots.txt

RobotsRules RobotsRules::parse(std::string_view text, std::string_view user_agent)
{
    // Groups are runs of User-agent lines followed by rules. The most specific matching group wins;
    // "*" is the fallback.
    struct Group {
        std::vector<std::string> agents;
        std::vector<std::pair<std::string, bool>> rules;
    };
    std::vector<Group> groups;
    bool in_agents = false;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) {
            end = text.size();
        }
        auto line = text.substr(pos, end - pos);
        pos = end + 1;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        const auto colon = line.find(':');
        if (colon == std::string_view::npos) {
            continue;
        }
        const auto key = lower(trim(line.substr(0, colon)));
        const auto value = std::string(trim(line.substr(colon + 1)));
        if (key == "user-agent") {
            if (!in_agents) {
                groups.emplace_back();
            }
            groups.back().agents.push_back(lower(value));
            in_agents = true;
        } else if ((key == "disallow" || key == "allow") && !groups.empty()) {
            in_agents = false;
            if (key == "disallow" && value.empty()) {
                continue; // "Disallow:" allows everything
            }
            groups.back().rules.emplace_back(value, key == "allow");
        } else {
            in_agents = false;
        }
    }

    const auto agent = lower(user_agent);
    const Group *best = nullptr;
    std::size_t best_len = 0;
    for (const auto &g : groups) {
        for (const auto &a : g.agents) {
            if (a == "*" && best == nullptr) {
                best = &g;
            } else if (a != "*" && !a.empty() && agent.find(a) != std::string::npos && a.size() > best_len) {
                best = &g;
                best_len = a.size();
            }
        }
    }
    RobotsRules rules;
    if (best != nullptr) {
        rules.rules_ = best->rules;
    }
    return rules;
}

bool RobotsRules::allowed(std::string_view path) const
{
    std::size_t best_len = 0;
    bool allow = true;
    for (const auto &[prefix, is_allow] : rules_) {
        if (path.starts_with(prefix) && (prefix.size() > best_len || (prefix.size() == best_len && is_allow))) {
            best_len = prefix.size();
            allow = is_allow;
        }
    }
    return allow;
}

// ---------------------------------------------------------------------------
// Downloader

struct Downloader::HostState {
    std::mutex mutex; // serializes requests to one host
    std::optional<std::chrono::steady_clock::time_point> last_request;
    std::vector<std::chrono::steady_clock::time_point> request_times;
    std::optional<RobotsRules> robots;
};

Downloader::Downloader(DownloadPolicy policy) : policy_(std::move(policy))
{
    if (policy_.attempts < 1) {
        throw InvalidArgument("download attempts must be >= 1");
    }
    if (policy_.rate_per_host < 0.0) {
        throw InvalidArgument("rate_per_host must be >= 0");
    }
    if (policy_.max_redirects < 0) {
        throw InvalidArgument("max_redirects must be >= 0");
    }
}

Downloader::~Downloader() = default;

Downloader::HostState &Downloader::host_state(const std::string &host) const
{
    std::lock_guard lock(hosts_mutex_);
    auto &slot = hosts_[host];
    if (!slot) {
        slot = std::make_unique<HostState>();
    }
    return *slot;
}

std::vector<std::chrono::steady_clock::time_point> Downloader::request_times(std::string_view host) const
{
    HostState *state = nullptr;
    {
        std::lock_guard lock(hosts_mutex_);
        const auto it = hosts_.find(std::string(host));
        if (it == hosts_.end()) {
            return {};
        }
        state = it->second.get();
    }
    std::lock_guard lock(state->mutex);
    return state->request_times;
}

WebResource Downloader::download(std::string_view url_text) const
{
    auto url = http::parse_url(url_text);
    http::RequestOptions req;
    req.timeout = policy_.timeout;
    req.max_bytes = policy_.max_bytes;
    req.headers["User-Agent"] = policy_.user_agent;
    const http::RetryPolicy retry{.attempts = policy_.attempts, .base_backoff = policy_.base_backoff};

    // One request, paced against the host's previous request. Caller holds state.mutex.
    auto paced_get = [&](HostState &state, const http::Url &target) {
        const auto now = std::chrono::steady_clock::now();
        if (policy_.rate_per_host > 0.0 && state.last_request) {
            const auto gap = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                std::chrono::duration<double>(1.0 / policy_.rate_per_host));
            const auto ready = *state.last_request + gap;
            if (ready > now) {
                std::this_thread::sleep_until(ready);
            }
        }
        const auto start = std::chrono::steady_clock::now();
        state.last_request = start;
        state.request_times.push_back(start);
        return http::get(target, req);
    };

    WebResource out;
    out.metadata["requested_url"] = std::string(url_text);
    int redirects = 0;
    for (;;) {
        auto &state = host_state(host_key(url));
        std::unique_lock host_lock(state.mutex);

        if (policy_.respect_robots) {
            if (!state.robots) {
                state.robots = RobotsRules{};
                try {
                    http::Url robots_url = url;
                    robots_url.target = "/robots.txt";
                    const auto r = paced_get(state, robots_url);
                    if (r.ok()) {
                        state.robots = RobotsRules::parse(r.body, policy_.user_agent);
                    }
                } catch (const http::TransportError &e) {
                    spdlog::debug("robots.txt for {} unavailable: {}", url.origin(), e.what());
                }
            }
            if (!state.robots->allowed(url.target)) {
                throw RobotsDisallowed("robots.txt disallows " + url.str());
            }
        }

        http::Response resp;
        for (int attempt = 1;; ++attempt) {
            try {
                resp = paced_get(state, url);
                if (!http::is_retryable_status(resp.status) || attempt == policy_.attempts) {
                    break;
                }
                spdlog::debug("GET {} -> {}, retrying", url.str(), resp.status);
            } catch (const http::TransportError &) {
                if (attempt == policy_.attempts) {
                    throw;
                }
            }
            host_lock.unlock();
            std::this_thread::sleep_for(retry.backoff(attempt));
            host_lock.lock();
        }

        if (is_redirect(resp.status) && !resp.header("location").empty()) {
            if (redirects == policy_.max_redirects) {
                throw IoError("too many redirects fetching " + std::string(url_text));
            }
            ++redirects;
            url = http::parse_url(http::resolve_url(url, resp.header("location")));
            continue;
        }

        out.url = url.str();
        out.status_code = resp.status;
        out.content_type = resp.header("content-type");
        out.fetched_at = std::chrono::system_clock::now();
        out.metadata["redirects"] = std::to_string(redirects);
        if (resp.ok()) {
            out.body = std::move(resp.body);
            if (resp.truncated) {
                out.metadata["truncated"] = "true";
            }
        }
        return out;
    }
}

bool WebResource::truncated() const
{
    const auto it = metadata.find("truncated");
    return it != metadata.end() && it->second == "true";
}

// ---------------------------------------------------------------------------
// Reader

ParsedDocument read_web(const WebResource &resource)
{
    if (!resource.ok()) {
        throw InvalidArgument("cannot read " + resource.url + ": HTTP " + std::to_string(resource.status_code));
    }
    auto mime = lower(resource.content_type.substr(0, resource.content_type.find(';')));
    mime = std::string(trim(mime));
    DocFormat format;
    if (mime == "text/html" || mime == "application/xhtml+xml") {
        format = DocFormat::html;
    } else if (mime == "text/markdown") {
        format = DocFormat::markdown;
    } else if (mime == "text/plain" || mime.empty()) {
        format = DocFormat::plain;
    } else {
        throw InvalidArgument("unsupported content type '" + resource.content_type + "' for " + resource.url);
    }
    return parse_document(resource.body, format, resource.url);
}

// ---------------------------------------------------------------------------
// web_retrieve

WebRetrieveResult web_retrieve(std::string_view query, std::size_t k, const WebSeeker &seeker,
                               const Downloader &downloader, const WebRetrieveOptions &options)
{
    if (options.concurrency < 1) {
        throw InvalidArgument("web_retrieve concurrency must be >= 1");
    }
    const auto seeks = seeker.seek(query, k);
    std::vector<std::optional<WebContext>> pages(seeks.size());
    std::vector<std::string> errors(seeks.size());

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < seeks.size();) {
            try {
                const auto resource = downloader.download(seeks[i].url);
                if (!resource.ok()) {
                    throw IoError("HTTP " + std::to_string(resource.status_code));
                }
                auto doc = read_web(resource);
                pages[i] = WebContext{seeks[i].url, std::move(doc.title), std::move(doc.text), 0, seeks[i].rank};
            } catch (const std::exception &e) {
                errors[i] = e.what();
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        const auto n = std::min(options.concurrency, seeks.size());
        for (std::size_t w = 0; w < n; ++w) {
            pool.emplace_back(worker);
        }
    }

    WebRetrieveResult result;
    for (std::size_t i = 0; i < seeks.size(); ++i) {
        if (pages[i]) {
            pages[i]->rank = result.contexts.size() + 1;
            result.contexts.push_back(std::move(*pages[i]));
        } else {
            spdlog::warn("web: skipping {}: {}", seeks[i].url, errors[i]);
            result.failures.push_back({seeks[i].url, errors[i]});
        }
    }
    return result;
}

nlohmann::json to_json(const WebContext &ctx)
{
    nlohmann::json j;
    j["url"] = ctx.url;
    j["title"] = ctx.title ? nlohmann::json(*ctx.title) : nlohmann::json(nullptr);
    j["text"] = ctx.text;
    j["rank"] = ctx.rank;
    j["seek_rank"] = ctx.seek_rank;
    return j;
}

} // namespace flexkit
