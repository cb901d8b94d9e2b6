#pragma once

#include <chrono>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "flexkit/hashing.hpp"
#include "flexkit/search_types.hpp"

namespace flexkit {

/// Client for a generic JSON search endpoint.
///
/// Request:  POST {"query": "...", "k": 10}
/// Response: {"hits": [{"id": 3, "score": 1.5}, ...]}
class RemoteSearchClient {
public:
    explicit RemoteSearchClient(std::string endpoint, std::chrono::milliseconds timeout = std::chrono::seconds(10),
                                int attempts = 3);

    [[nodiscard]] std::vector<SearchHit> search(std::string_view query, std::size_t k) const;
    [[nodiscard]] const std::string &endpoint() const noexcept { return endpoint_; }
    /// Remote indexes have no build id; the endpoint stands in for one.
    [[nodiscard]] Digest128 identity() const;

private:
    std::string endpoint_;
    std::chrono::milliseconds timeout_;
    int attempts_;
};

} // namespace flexkit
