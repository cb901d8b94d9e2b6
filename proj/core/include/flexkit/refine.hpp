#pragma once

// Deterministic refiners applied to retrieved contexts before generation.

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "flexkit/context.hpp"

namespace flexkit {

enum class RepackStrategy { as_is, reverse, sandwich };

[[nodiscard]] RepackStrategy parse_repack_strategy(std::string_view name);
[[nodiscard]] std::string_view to_string(RepackStrategy strategy) noexcept;

/// Reorders contexts (given best first).
///   as_is    identity
///   reverse  best last
///   sandwich odd ranks forward then even ranks backward: 1,3,5,...,6,4,2
/// Ranks are left untouched so the original relevance stays visible.
[[nodiscard]] std::vector<RetrievedContext> repack(std::vector<RetrievedContext> contexts, RepackStrategy strategy);

/// Keeps contexts in order while the running token count fits the budget; the first context
/// that does not fit is cut at a token boundary to fill the budget exactly, the rest dropped.
[[nodiscard]] std::vector<RetrievedContext> squeeze(std::vector<RetrievedContext> contexts, std::size_t token_budget);

struct RefineConfig {
    RepackStrategy strategy = RepackStrategy::as_is;
    std::optional<std::size_t> token_budget;

    [[nodiscard]] nlohmann::json to_json() const;
    [[nodiscard]] static RefineConfig from_json(const nlohmann::json &j);
    friend bool operator==(const RefineConfig &, const RefineConfig &) = default;
};

/// squeeze (when a budget is set) then repack.
[[nodiscard]] std::vector<RetrievedContext> refine(std::vector<RetrievedContext> contexts, const RefineConfig &config);

} // namespace flexkit
