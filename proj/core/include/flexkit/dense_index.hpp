#pragma once

// Exact (FLAT) and IVF-PQ vector indexes sharing one memory-mappable file format.
//
// File layout ("FDI1", little-endian): a 4096-byte header page, then page-aligned raw regions.
//   flat:  vectors (N x D f32)
//   ivfpq: coarse centroids (nlist x D f32) | PQ codebooks (m x 2^nbits x D/m f32)
//          | list directory (nlist x {first u64, length u64}) | doc ids (N x u32, grouped by list)
//          | codes (N x code_size bytes, same order as doc ids)

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "flexkit/hashing.hpp"
#include "flexkit/mapped_file.hpp"
#include "flexkit/search_types.hpp"

namespace flexkit {

enum class Metric : std::uint32_t { inner_product = 0, l2 = 1 };

[[nodiscard]] Metric parse_metric(std::string_view name);
[[nodiscard]] std::string_view to_string(Metric metric) noexcept;

struct IvfPqParams {
    std::size_t nlist = 1;
    std::size_t nprobe = 1;
    std::size_t m = 1;
    std::size_t nbits = 8;
    Metric metric = Metric::inner_product;
    /// Lloyd iterations for coarse and PQ training.
    int train_iters = 20;

    /// Throws InvalidArgument when the parameters cannot index `n` vectors of dimension `dim`.
    void validate(std::size_t dim, std::size_t n) const;
    [[nodiscard]] std::size_t ksub() const noexcept { return std::size_t{1} << nbits; }
    [[nodiscard]] std::size_t code_size() const noexcept { return nbits == 8 ? m : (m + 1) / 2; }
};

/// Parameter sizing rule for IVF-PQ:
///   nlist  = clamp(round(4 sqrt(n)), 1, max(1, n / 39))
///   nprobe = clamp(round(nlist / 8), 1, nlist)
///   m      = largest divisor of dim with dim / m >= 4 and m <= 64 (1 when none exists)
///   nbits  = 8
[[nodiscard]] IvfPqParams size_ivfpq(std::size_t n_vectors, std::size_t dim);

/// Minimum training-set size per coarse centroid below which training quality degrades.
inline constexpr std::size_t kMinTrainPerCentroid = 39;
/// Training sample cap per coarse centroid.
inline constexpr std::size_t kMaxTrainPerCentroid = 256;

enum class DenseKind : std::uint32_t { flat = 0, ivfpq = 1 };

class DenseIndex {
public:
    virtual ~DenseIndex() = default;

    [[nodiscard]] virtual DenseKind kind() const noexcept = 0;
    [[nodiscard]] std::size_t dimension() const noexcept { return dim_; }
    [[nodiscard]] std::size_t size() const noexcept { return n_; }
    [[nodiscard]] Metric metric() const noexcept { return metric_; }
    [[nodiscard]] const Digest128 &build_id() const noexcept { return build_id_; }

    /// Top-k by similarity (inner product, or negative squared L2), ties by ascending doc id.
    /// nprobe_override is ignored by exact indexes.
    [[nodiscard]] virtual std::vector<SearchHit> search(std::span<const float> query, std::size_t k,
                                                        std::optional<std::size_t> nprobe_override = {}) const = 0;

protected:
    void check_query(std::span<const float> query, std::size_t k) const;

    MappedFile file_;
    std::size_t dim_ = 0;
    std::size_t n_ = 0;
    Metric metric_ = Metric::inner_product;
    Digest128 build_id_;
};

class FlatIndex final : public DenseIndex {
public:
    explicit FlatIndex(const std::filesystem::path &path);

    [[nodiscard]] DenseKind kind() const noexcept override { return DenseKind::flat; }
    [[nodiscard]] std::vector<SearchHit> search(std::span<const float> query, std::size_t k,
                                                std::optional<std::size_t> nprobe_override = {}) const override;
    [[nodiscard]] std::span<const float> vector(DocId id) const;

private:
    const float *vectors_ = nullptr;
};

class IvfPqIndex final : public DenseIndex {
public:
    explicit IvfPqIndex(const std::filesystem::path &path);

    [[nodiscard]] DenseKind kind() const noexcept override { return DenseKind::ivfpq; }
    [[nodiscard]] std::vector<SearchHit> search(std::span<const float> query, std::size_t k,
                                                std::optional<std::size_t> nprobe_override = {}) const override;

    [[nodiscard]] const IvfPqParams &params() const noexcept { return params_; }
    [[nodiscard]] std::uint64_t trained_on() const noexcept { return trained_on_; }
    [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }

    [[nodiscard]] std::span<const float> coarse_centroid(std::size_t list) const;
    /// Centroid `c` of subquantizer `sub` (D/m floats).
    [[nodiscard]] std::span<const float> pq_centroid(std::size_t sub, std::size_t c) const;
    [[nodiscard]] std::size_t list_size(std::size_t list) const;
    [[nodiscard]] std::span<const std::uint32_t> list_ids(std::size_t list) const;
    [[nodiscard]] std::span<const std::uint8_t> list_codes(std::size_t list) const;
    /// Unpacked subquantizer indices for entry `pos` of `list`.
    [[nodiscard]] std::vector<std::uint16_t> code(std::size_t list, std::size_t pos) const;

    /// coarse centroid + concatenated PQ centroids.
    [[nodiscard]] std::vector<float> reconstruct(std::size_t list, std::span<const std::uint16_t> code) const;
    /// Similarity of `query` against a code through the ADC lookup tables.
    [[nodiscard]] float adc_score(std::span<const float> query, std::size_t list,
                                  std::span<const std::uint16_t> code) const;
    /// Coarse lists the query would probe, best first.
    [[nodiscard]] std::vector<std::size_t> probe_order(std::span<const float> query, std::size_t nprobe) const;

private:
    [[nodiscard]] std::vector<float> lookup_table(std::span<const float> target) const;

    IvfPqParams params_;
    std::uint64_t seed_ = 0;
    std::uint64_t trained_on_ = 0;
    const float *coarse_ = nullptr;
    const float *codebooks_ = nullptr;
    const std::byte *directory_ = nullptr;
    const std::uint32_t *ids_ = nullptr;
    const std::uint8_t *codes_ = nullptr;
};

/// Opens either index kind based on the file header.
[[nodiscard]] std::unique_ptr<DenseIndex> open_dense_index(const std::filesystem::path &path);

/// `vectors` holds N x dim floats.
Digest128 build_flat_index(std::span<const float> vectors, std::size_t dim, Metric metric,
                           const std::filesystem::path &out, std::uint64_t build_seed = 0);

struct IvfPqBuildStats {
    Digest128 build_id;
    std::size_t training_samples = 0;
    bool undersized_training = false;
};

IvfPqBuildStats build_ivfpq_index(std::span<const float> vectors, std::size_t dim, const IvfPqParams &params,
                                  std::uint64_t seed, const std::filesystem::path &out);

/// Similarity used for ranking: inner product, or negative squared L2.
[[nodiscard]] float similarity(const float *a, const float *b, std::size_t dim, Metric metric) noexcept;

} // namespace flexkit
