#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "flexkit/retriever_config.hpp"

namespace flexkit {

struct CacheSettings {
    bool enabled = true;
    std::filesystem::path dir;
    std::size_t capacity = 10000;
};

/// A retriever config document plus run settings:
///
///   { ...retriever config keys...,
///     "cache": {"enabled": true, "dir": "cache", "capacity": 10000},
///     "log_level": "warn" }
///
/// Every string value may reference environment variables as ${NAME}.
struct PipelineConfig {
    RetrieverConfig retriever;
    CacheSettings cache;
    std::string log_level = "warn";
};

/// Replaces ${NAME} with the variable's value. Unset names are appended to `missing`.
[[nodiscard]] std::string interpolate_env(std::string_view text, std::vector<std::string> &missing);

/// $FLEXKIT_CACHE_DIR, else $XDG_CACHE_HOME/flexkit, else ~/.cache/flexkit.
[[nodiscard]] std::filesystem::path default_cache_dir();

/// Validates eagerly: every problem (bad values, unset variables, missing files) is reported in one
/// InvalidArgument.
[[nodiscard]] PipelineConfig parse_pipeline_config(const nlohmann::json &doc, const std::filesystem::path &base_dir);
[[nodiscard]] PipelineConfig load_pipeline_config(const std::filesystem::path &path);

} // namespace flexkit
