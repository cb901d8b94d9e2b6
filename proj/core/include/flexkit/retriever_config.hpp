#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "flexkit/encoder.hpp"
#include "flexkit/refine.hpp"

namespace flexkit {

enum class IndexType { bm25, flat, ivfpq, remote };

[[nodiscard]] IndexType parse_index_type(std::string_view name);
[[nodiscard]] std::string_view to_string(IndexType type) noexcept;
[[nodiscard]] bool is_dense(IndexType type) noexcept;

/// One searchable index over one document field.
struct IndexRef {
    std::string name;
    std::string field;
    IndexType type = IndexType::bm25;
    std::filesystem::path path;  // local indexes
    std::string endpoint;        // remote search endpoint
    std::optional<std::size_t> nprobe;

    friend bool operator==(const IndexRef &, const IndexRef &) = default;
};

enum class Fusion { weighted_sum, rrf };

[[nodiscard]] Fusion parse_fusion(std::string_view name);
[[nodiscard]] std::string_view to_string(Fusion fusion) noexcept;

struct RetrieverConfig {
    std::vector<IndexRef> indexes;
    /// Corpus store supplying context text. Optional unless a reranker is set.
    std::filesystem::path store;
    Fusion fusion = Fusion::rrf;
    /// One positive weight per index (weighted_sum). Empty means all 1.0.
    std::vector<double> weights;
    int rrf_c = 60;
    std::size_t retrieve_k = 100;
    std::size_t final_k = 10;
    /// "lexical" or empty.
    std::string reranker;
    /// Required when any index is dense.
    std::optional<EncoderSpec> encoder;
    RefineConfig refine;

    /// Throws InvalidArgument listing every violated invariant.
    void validate() const;
    [[nodiscard]] double weight(std::size_t index) const;

    /// Canonical form. Paths are omitted when `with_paths` is false (as for fingerprinting).
    [[nodiscard]] nlohmann::json to_json(bool with_paths = true) const;
    /// Relative index paths resolve against `base_dir`. Validates.
    [[nodiscard]] static RetrieverConfig from_json(const nlohmann::json &j, const std::filesystem::path &base_dir = {});
    /// from_json without the validate() step.
    [[nodiscard]] static RetrieverConfig parse_json(const nlohmann::json &j, const std::filesystem::path &base_dir = {});
};

} // namespace flexkit
