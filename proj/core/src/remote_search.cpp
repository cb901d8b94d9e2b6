#include "flexkit/remote_search.hpp"

#include "flexkit/errors.hpp"
#include "flexkit/http.hpp"

#include <json.hpp>

#include <thread>

namespace flexkit {

RemoteSearchClient::RemoteSearchClient(std::string endpoint, std::chrono::milliseconds timeout, int attempts)
    : endpoint_(std::move(endpoint)), timeout_(timeout), attempts_(attempts)
{
    (void)http::parse_url(endpoint_);
    if (attempts_ < 1) {
        throw InvalidArgument("remote search attempts must be >= 1");
    }
}

Digest128 RemoteSearchClient::identity() const { return digest128({"remote", endpoint_}); }

std::vector<SearchHit> RemoteSearchClient::search(std::string_view query, std::size_t k) const
{
    const auto url = http::parse_url(endpoint_);
    const std::string body = nlohmann::json{{"query", query}, {"k", k}}.dump();
    http::RequestOptions opts;
    opts.timeout = timeout_;
    const http::RetryPolicy policy{.attempts = attempts_};

    http::Response resp;
    for (int attempt = 1;; ++attempt) {
        try {
            resp = http::post(url, body, "application/json", opts);
            if (!http::is_retryable_status(resp.status) || attempt == attempts_) {
                break;
            }
        } catch (const http::TransportError &) {
            if (attempt == attempts_) {
                throw;
            }
        }
        std::this_thread::sleep_for(policy.backoff(attempt));
    }
    if (!resp.ok()) {
        throw IoError("remote search " + endpoint_ + " returned HTTP " + std::to_string(resp.status) + ": " +
                      resp.body.substr(0, 200));
    }

    std::vector<SearchHit> hits;
    try {
        const auto j = nlohmann::json::parse(resp.body);
        for (const auto &h : j.at("hits")) {
            hits.push_back({h.at("id").get<DocId>(), h.at("score").get<double>()});
        }
    } catch (const nlohmann::json::exception &e) {
        throw FormatError("malformed remote search response from " + endpoint_ + ": " + e.what());
    }
    keep_top_k(hits, k);
    return hits;
}

} // namespace flexkit
