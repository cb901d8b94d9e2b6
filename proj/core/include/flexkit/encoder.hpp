#pragma once

// Dense text encoders: a deterministic feature-hashing baseline and a remote embedding-API client.

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace flexkit {

struct Embedding {
    std::vector<float> values;
    bool normalized = false;

    [[nodiscard]] std::size_t dimension() const noexcept { return values.size(); }
    friend bool operator==(const Embedding &, const Embedding &) = default;
};

enum class EncoderKind { hashed_projection, remote };

struct EncoderSpec {
    EncoderKind kind = EncoderKind::hashed_projection;
    int dimension = 256;
    std::uint64_t seed = 0;

    // remote only
    std::string endpoint; // full URL of the embeddings endpoint
    std::string model;
    std::string auth_env; // name of the env var holding a bearer token; empty = no auth
    std::size_t batch_size = 64;
    std::size_t max_connections = 4;
    int attempts = 3;
    std::chrono::milliseconds base_backoff{200};
    std::chrono::milliseconds timeout{30000};

    [[nodiscard]] nlohmann::json to_json() const;
    [[nodiscard]] static EncoderSpec from_json(const nlohmann::json &j);
};

class Encoder {
public:
    virtual ~Encoder() = default;
    [[nodiscard]] virtual std::size_t dimension() const noexcept = 0;
    [[nodiscard]] virtual std::vector<Embedding> encode_batch(std::span<const std::string> texts) const = 0;
    [[nodiscard]] Embedding encode(std::string_view text) const;
};

[[nodiscard]] std::unique_ptr<Encoder> make_encoder(const EncoderSpec &spec);

/// Feature hashing over tokens and token bigrams (2*D signed buckets, log(1+tf) weights),
/// followed by an implicit seed-derived +-1 projection to D dimensions and L2 normalisation.
/// Pure function of (text, seed, D). Empty input yields an all-zero, unnormalised vector.
[[nodiscard]] Embedding encode_hashed(std::string_view text, const EncoderSpec &spec);

/// POSTs {"model":..., "input":[...]} and expects {"data":[{"embedding":[...]}, ...]}.
/// Batches run concurrently up to spec.max_connections; a 413 splits the batch in half.
[[nodiscard]] std::vector<Embedding> encode_remote(std::span<const std::string> texts, const EncoderSpec &spec);

[[nodiscard]] float dot(std::span<const float> a, std::span<const float> b) noexcept;
[[nodiscard]] float cosine(std::span<const float> a, std::span<const float> b) noexcept;

/// Raw little-endian float32 rows, no header.
void write_embeddings(const std::filesystem::path &path, std::span<const Embedding> rows);
void write_embedding_matrix(const std::filesystem::path &path, std::span<const float> values);
[[nodiscard]] std::vector<float> read_embedding_matrix(const std::filesystem::path &path, std::size_t dimension);

} // namespace flexkit
