#pragma once

// Minimal blocking HTTP client shared by remote encoders, search clients and the web downloader.

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>

#include "flexkit/errors.hpp"

namespace flexkit::http {

struct Url {
    std::string scheme; // "http" or "https"
    std::string host;
    int port = 0;
    std::string target = "/"; // path + query

    [[nodiscard]] std::string origin() const;
    [[nodiscard]] std::string str() const;
};

/// Parses an absolute http(s) URL. Throws InvalidArgument for other schemes or malformed input.
[[nodiscard]] Url parse_url(std::string_view url);

/// Percent-encodes one query-string component.
[[nodiscard]] std::string encode_query_component(std::string_view value);

/// Resolves a Location header value against the URL that produced it.
[[nodiscard]] std::string resolve_url(const Url &base, std::string_view reference);

struct Response {
    int status = 0;
    std::map<std::string, std::string> headers; // lower-cased names
    std::string body;
    bool truncated = false;

    [[nodiscard]] std::string header(std::string_view name) const;
    [[nodiscard]] bool ok() const noexcept { return status >= 200 && status < 300; }
};

struct RequestOptions {
    std::chrono::milliseconds timeout{10000};
    /// 0 means unlimited. Bodies longer than this are cut and flagged truncated.
    std::size_t max_bytes = 0;
    std::map<std::string, std::string> headers;
};

/// Transport-level failure (DNS, connect, timeout, TLS). HTTP error statuses are not exceptions.
class TransportError : public IoError {
public:
    using IoError::IoError;
};

[[nodiscard]] Response get(const Url &url, const RequestOptions &options = {});
[[nodiscard]] Response post(const Url &url, std::string_view body, std::string_view content_type,
                            const RequestOptions &options = {});

struct RetryPolicy {
    int attempts = 3;
    std::chrono::milliseconds base_backoff{200};
    double multiplier = 2.0;

    /// Delay before retry number `retry` (1-based).
    [[nodiscard]] std::chrono::milliseconds backoff(int retry) const noexcept;
};

[[nodiscard]] bool is_retryable_status(int status) noexcept;

} // namespace flexkit::http
