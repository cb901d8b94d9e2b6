#include "flexkit/http.hpp"

#include <httplib.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>

namespace flexkit::http {
namespace {

std::string lower(std::string_view s)
{
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

httplib::Client make_client(const Url &url, const RequestOptions &options)
{
    httplib::Client client(url.origin());
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(options.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(options.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    client.set_follow_location(false);
    client.set_keep_alive(false);
    return client;
}

httplib::Headers to_headers(const RequestOptions &options)
{
    httplib::Headers h;
    for (const auto &[k, v] : options.headers) {
        h.emplace(k, v);
    }
    return h;
}

void copy_headers(const httplib::Headers &from, Response &to)
{
    for (const auto &[k, v] : from) {
        to.headers[lower(k)] = v;
    }
}

[[noreturn]] void throw_transport(const Url &url, httplib::Error err)
{
    throw TransportError("request to " + url.str() + " failed: " + httplib::to_string(err));
}

} // namespace

std::string Url::origin() const
{
    const bool default_port = (scheme == "http" && port == 80) || (scheme == "https" && port == 443);
    return scheme + "://" + host + (default_port ? "" : ":" + std::to_string(port));
}

std::string Url::str() const { return origin() + target; }

Url parse_url(std::string_view url)
{
    Url out;
    const auto sep = url.find("://");
    if (sep == std::string_view::npos) {
        throw InvalidArgument("not an absolute URL: '" + std::string(url) + "'");
    }
    out.scheme = lower(url.substr(0, sep));
    if (out.scheme != "http" && out.scheme != "https") {
        throw InvalidArgument("unsupported URL scheme '" + out.scheme + "'");
    }
    auto rest = url.substr(sep + 3);
    const auto slash = rest.find_first_of("/?#");
    auto authority = rest.substr(0, slash);
    out.target = slash == std::string_view::npos ? "/" : std::string(rest.substr(slash));
    if (const auto hash = out.target.find('#'); hash != std::string::npos) {
        out.target.erase(hash);
    }
    if (out.target.empty() || out.target[0] != '/') {
        out.target.insert(out.target.begin(), '/');
    }
    if (const auto at = authority.rfind('@'); at != std::string_view::npos) {
        authority = authority.substr(at + 1);
    }
    out.port = out.scheme == "https" ? 443 : 80;
    const auto colon = authority.rfind(':');
    if (colon != std::string_view::npos && authority.find(']') == std::string_view::npos) {
        const auto port_str = authority.substr(colon + 1);
        int port = 0;
        const auto [ptr, ec] = std::from_chars(port_str.data(), port_str.data() + port_str.size(), port);
        if (ec != std::errc{} || ptr != port_str.data() + port_str.size() || port <= 0 || port > 65535) {
            throw InvalidArgument("invalid port in URL '" + std::string(url) + "'");
        }
        out.port = port;
        authority = authority.substr(0, colon);
    }
    if (authority.empty()) {
        throw InvalidArgument("URL has no host: '" + std::string(url) + "'");
    }
    out.host = lower(authority);
    return out;
}

std::string resolve_url(const Url &base, std::string_view ref)
{
    if (ref.find("://") != std::string_view::npos) {
        return std::string(ref);
    }
    if (ref.starts_with("//")) {
        return base.scheme + ":" + std::string(ref);
    }
    if (ref.starts_with("/")) {
        return base.origin() + std::string(ref);
    }
    std::string dir = base.target.substr(0, base.target.find('?'));
    dir = dir.substr(0, dir.rfind('/') + 1);
    return base.origin() + dir + std::string(ref);
}

std::string encode_query_component(std::string_view value)
{
    return httplib::detail::encode_query_param(std::string(value));
}

std::string Response::header(std::string_view name) const
{
    const auto it = headers.find(lower(name));
    return it == headers.end() ? std::string() : it->second;
}

Response get(const Url &url, const RequestOptions &options)
{
    auto client = make_client(url, options);
    Response out;
    bool cut = false;
    auto result = client.Get(
        url.target, to_headers(options),
        [&](const httplib::Response &r) {
            out.status = r.status;
            copy_headers(r.headers, out);
            return true;
        },
        [&](const char *data, std::size_t len) {
            if (options.max_bytes > 0 && out.body.size() + len > options.max_bytes) {
                out.body.append(data, options.max_bytes - out.body.size());
                cut = true;
                return false;
            }
            out.body.append(data, len);
            return true;
        });
    if (!result) {
        if (cut && result.error() == httplib::Error::Canceled) {
            out.truncated = true;
            return out;
        }
        throw_transport(url, result.error());
    }
    return out;
}

Response post(const Url &url, std::string_view body, std::string_view content_type, const RequestOptions &options)
{
    auto client = make_client(url, options);
    auto result = client.Post(url.target, to_headers(options), body.data(), body.size(), std::string(content_type));
    if (!result) {
        throw_transport(url, result.error());
    }
    Response out;
    out.status = result->status;
    copy_headers(result->headers, out);
    out.body = std::move(result->body);
    if (options.max_bytes > 0 && out.body.size() > options.max_bytes) {
        out.body.resize(options.max_bytes);
        out.truncated = true;
    }
    return out;
}

std::chrono::milliseconds RetryPolicy::backoff(int retry) const noexcept
{
    const double factor = std::pow(multiplier, std::max(0, retry - 1));
    return std::chrono::milliseconds(static_cast<std::int64_t>(static_cast<double>(base_backoff.count()) * factor));
}

bool is_retryable_status(int status) noexcept { return status >= 500 || status == 429 || status == 408; }

} // namespace flexkit::http
