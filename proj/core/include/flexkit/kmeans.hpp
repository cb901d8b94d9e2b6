#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace flexkit {

struct KMeansOptions {
    std::size_t k = 1;
    int max_iter = 25;
    std::uint64_t seed = 0;
    /// Stop once (J_prev - J) / J_prev falls below this.
    double tolerance = 1e-4;
};

struct KMeansResult {
    std::vector<float> centroids; // k x dim, row-major
    /// Sum of squared distances after each assignment step.
    std::vector<double> objective;
    int iterations = 0;
};

/// k-means++ seeding followed by Lloyd iterations. An empty cluster is re-seeded with the point
/// of the largest cluster that lies farthest from that cluster's centroid.
/// `data` holds n x dim floats. Throws InvalidArgument when k > n or k == 0.
[[nodiscard]] KMeansResult kmeans(std::span<const float> data, std::size_t dim, const KMeansOptions &options);

/// Squared L2 distance.
[[nodiscard]] float l2_sq(const float *a, const float *b, std::size_t dim) noexcept;

/// Index of the nearest centroid (ties to the lower index) and its squared distance.
[[nodiscard]] std::pair<std::size_t, float> nearest_centroid(const float *x, std::span<const float> centroids,
                                                             std::size_t dim) noexcept;

} // namespace flexkit
