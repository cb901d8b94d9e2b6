#include "flexkit/kmeans.hpp"

#include "flexkit/detail/rng.hpp"
#include "flexkit/errors.hpp"

#include <algorithm>
#include <limits>
#include <string>

namespace flexkit {

float l2_sq(const float *a, const float *b, std::size_t dim) noexcept
{
    float s = 0.0f;
    for (std::size_t i = 0; i < dim; ++i) {
        const float d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

std::pair<std::size_t, float> nearest_centroid(const float *x, std::span<const float> centroids, std::size_t dim) noexcept
{
    const std::size_t k = centroids.size() / dim;
    std::size_t best = 0;
    float best_d = std::numeric_limits<float>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
        const float d = l2_sq(x, centroids.data() + c * dim, dim);
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    return {best, best_d};
}

namespace {

std::vector<float> plus_plus_seeds(std::span<const float> data, std::size_t n, std::size_t dim, std::size_t k,
                                   detail::Rng &rng)
{
    std::vector<float> centroids;
    centroids.reserve(k * dim);
    std::vector<bool> chosen(n, false);
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());

    auto add_center = [&](std::size_t idx) {
        chosen[idx] = true;
        const float *p = data.data() + idx * dim;
        centroids.insert(centroids.end(), p, p + dim);
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], static_cast<double>(l2_sq(data.data() + i * dim, p, dim)));
        }
    };

    add_center(rng.below(n));
    while (centroids.size() < k * dim) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            total += chosen[i] ? 0.0 : d2[i];
        }
        std::size_t pick = n;
        if (total > 0.0) {
            const double r = rng.uniform01() * total;
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (chosen[i] || d2[i] == 0.0) {
                    continue;
                }
                acc += d2[i];
                pick = i;
                if (acc > r) {
                    break;
                }
            }
        }
        if (pick == n) {
            // Every remaining point coincides with a centre; take the first unused one.
            pick = static_cast<std::size_t>(std::find(chosen.begin(), chosen.end(), false) - chosen.begin());
        }
        add_center(pick);
    }
    return centroids;
}

} // namespace

KMeansResult kmeans(std::span<const float> data, std::size_t dim, const KMeansOptions &options)
{
    if (dim == 0 || data.size() % dim != 0) {
        throw InvalidArgument("k-means input size is not a multiple of the dimension");
    }
    const std::size_t n = data.size() / dim;
    const std::size_t k = options.k;
    if (k == 0) {
        throw InvalidArgument("k-means requires k >= 1");
    }
    if (k > n) {
        throw InvalidArgument("k-means k (" + std::to_string(k) + ") exceeds the number of vectors (" +
                              std::to_string(n) + ")");
    }
    if (options.max_iter < 1) {
        throw InvalidArgument("k-means max_iter must be >= 1");
    }

    detail::Rng rng(options.seed);
    KMeansResult result;
    result.centroids = plus_plus_seeds(data, n, dim, k, rng);

    std::vector<std::uint32_t> assign(n, 0);
    std::vector<float> dist(n, 0.0f);
    std::vector<double> sums(k * dim);
    std::vector<std::size_t> counts(k);

    for (int iter = 0; iter < options.max_iter; ++iter) {
        double objective = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto [c, d] = nearest_centroid(data.data() + i * dim, result.centroids, dim);
            assign[i] = static_cast<std::uint32_t>(c);
            dist[i] = d;
            objective += d;
        }
        result.objective.push_back(objective);
        result.iterations = iter + 1;

        if (iter > 0) {
            const double prev = result.objective[result.objective.size() - 2];
            if (prev <= 0.0 || (prev - objective) / prev < options.tolerance) {
                break;
            }
        } else if (objective == 0.0) {
            break;
        }
        if (iter + 1 == options.max_iter) {
            break;
        }

        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            const float *p = data.data() + i * dim;
            double *s = sums.data() + std::size_t{assign[i]} * dim;
            for (std::size_t j = 0; j < dim; ++j) {
                s[j] += p[j];
            }
            ++counts[assign[i]];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) {
                continue;
            }
            for (std::size_t j = 0; j < dim; ++j) {
                result.centroids[c * dim + j] = static_cast<float>(sums[c * dim + j] / static_cast<double>(counts[c]));
            }
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] != 0) {
                continue;
            }
            const auto largest = static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
            if (counts[largest] < 2) {
                continue;
            }
            std::size_t far = n;
            float far_d = -1.0f;
            for (std::size_t i = 0; i < n; ++i) {
                if (assign[i] != largest) {
                    continue;
                }
                const float d = l2_sq(data.data() + i * dim, result.centroids.data() + largest * dim, dim);
                if (d > far_d) {
                    far_d = d;
                    far = i;
                }
            }
            std::copy_n(data.data() + far * dim, dim, result.centroids.begin() + static_cast<std::ptrdiff_t>(c * dim));
            assign[far] = static_cast<std::uint32_t>(c);
            --counts[largest];
            counts[c] = 1;
        }
    }
    return result;
}

} // namespace flexkit
