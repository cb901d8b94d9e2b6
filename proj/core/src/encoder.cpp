#include "flexkit/encoder.hpp"

#include "flexkit/detail/little_endian.hpp"
#include "flexkit/errors.hpp"
#include "flexkit/hashing.hpp"
#include "flexkit/http.hpp"
#include "flexkit/mapped_file.hpp"
#include "flexkit/tokenizer.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

namespace flexkit {
namespace {

constexpr std::uint64_t kSignSalt = 0x5bd1e9955bd1e995ULL;
constexpr std::uint64_t kProjectionSalt = 0x2545f4914f6cdd1dULL;

class HashedProjectionEncoder final : public Encoder {
public:
    explicit HashedProjectionEncoder(EncoderSpec spec) : spec_(std::move(spec)) {}
    std::size_t dimension() const noexcept override { return static_cast<std::size_t>(spec_.dimension); }
    std::vector<Embedding> encode_batch(std::span<const std::string> texts) const override
    {
        std::vector<Embedding> out;
        out.reserve(texts.size());
        for (const auto &t : texts) {
            out.push_back(encode_hashed(t, spec_));
        }
        return out;
    }

private:
    EncoderSpec spec_;
};

class RemoteEncoder final : public Encoder {
public:
    explicit RemoteEncoder(EncoderSpec spec) : spec_(std::move(spec)) {}
    std::size_t dimension() const noexcept override { return static_cast<std::size_t>(spec_.dimension); }
    std::vector<Embedding> encode_batch(std::span<const std::string> texts) const override
    {
        return encode_remote(texts, spec_);
    }

private:
    EncoderSpec spec_;
};

std::string_view to_string(EncoderKind kind)
{
    return kind == EncoderKind::remote ? "remote" : "hashed_projection";
}

http::Response post_with_retries(const http::Url &url, const std::string &body, const EncoderSpec &spec,
                                 const http::RequestOptions &options)
{
    const http::RetryPolicy policy{spec.attempts, spec.base_backoff, 2.0};
    for (int attempt = 1;; ++attempt) {
        try {
            auto res = http::post(url, body, "application/json", options);
            if (!http::is_retryable_status(res.status) || attempt >= policy.attempts) {
                return res;
            }
            spdlog::warn("embedding endpoint returned {}; retrying", res.status);
        } catch (const http::TransportError &e) {
            if (attempt >= policy.attempts) {
                throw IoError(std::string("embedding request failed after ") + std::to_string(attempt) +
                              " attempts: " + e.what());
            }
            spdlog::warn("embedding request failed ({}); retrying", e.what());
        }
        std::this_thread::sleep_for(policy.backoff(attempt));
    }
}

std::vector<Embedding> remote_batch(std::span<const std::string> texts, const EncoderSpec &spec,
                                    const http::Url &url, const http::RequestOptions &options)
{
    nlohmann::json req;
    req["model"] = spec.model;
    req["input"] = std::vector<std::string>(texts.begin(), texts.end());
    const auto res = post_with_retries(url, req.dump(), spec, options);
    if (res.status == 413 && texts.size() > 1) {
        const auto half = texts.size() / 2;
        auto left = remote_batch(texts.subspan(0, half), spec, url, options);
        auto right = remote_batch(texts.subspan(half), spec, url, options);
        left.insert(left.end(), std::make_move_iterator(right.begin()), std::make_move_iterator(right.end()));
        return left;
    }
    if (!res.ok()) {
        throw IoError("embedding endpoint returned HTTP " + std::to_string(res.status) + ": " + res.body);
    }
    nlohmann::json body;
    try {
        body = nlohmann::json::parse(res.body);
    } catch (const nlohmann::json::parse_error &e) {
        throw FormatError(std::string("embedding response is not JSON: ") + e.what());
    }
    if (!body.contains("data") || !body["data"].is_array() || body["data"].size() != texts.size()) {
        throw FormatError("embedding response must carry one 'data' entry per input");
    }
    std::vector<Embedding> out;
    out.reserve(texts.size());
    for (const auto &item : body["data"]) {
        if (!item.contains("embedding") || !item["embedding"].is_array()) {
            throw FormatError("embedding response entry lacks an 'embedding' array");
        }
        Embedding e;
        e.values = item["embedding"].get<std::vector<float>>();
        if (e.values.size() != static_cast<std::size_t>(spec.dimension)) {
            throw InvalidArgument("dimension mismatch: endpoint returned " + std::to_string(e.values.size()) +
                                  " dims, encoder spec declares " + std::to_string(spec.dimension));
        }
        double sq = 0.0;
        for (float v : e.values) {
            if (!std::isfinite(v)) {
                throw FormatError("embedding response contains a non-finite value");
            }
            sq += static_cast<double>(v) * v;
        }
        e.normalized = std::abs(std::sqrt(sq) - 1.0) <= 1e-5;
        out.push_back(std::move(e));
    }
    return out;
}

} // namespace

nlohmann::json EncoderSpec::to_json() const
{
    nlohmann::json j;
    j["kind"] = to_string(kind);
    j["dimension"] = dimension;
    if (kind == EncoderKind::hashed_projection) {
        j["seed"] = seed;
    } else {
        j["endpoint"] = endpoint;
        j["model"] = model;
        j["auth_env"] = auth_env;
        j["batch_size"] = batch_size;
        j["max_connections"] = max_connections;
    }
    return j;
}

EncoderSpec EncoderSpec::from_json(const nlohmann::json &j)
{
    EncoderSpec s;
    const auto kind = j.value("kind", std::string("hashed_projection"));
    if (kind == "hashed_projection") {
        s.kind = EncoderKind::hashed_projection;
    } else if (kind == "remote") {
        s.kind = EncoderKind::remote;
    } else {
        throw InvalidArgument("unknown encoder kind '" + kind + "'");
    }
    s.dimension = j.value("dimension", s.dimension);
    s.seed = j.value("seed", s.seed);
    s.endpoint = j.value("endpoint", s.endpoint);
    s.model = j.value("model", s.model);
    s.auth_env = j.value("auth_env", s.auth_env);
    s.batch_size = j.value("batch_size", s.batch_size);
    s.max_connections = j.value("max_connections", s.max_connections);
    s.attempts = j.value("attempts", s.attempts);
    s.base_backoff = std::chrono::milliseconds(j.value("base_backoff_ms", static_cast<std::int64_t>(s.base_backoff.count())));
    s.timeout = std::chrono::milliseconds(j.value("timeout_ms", static_cast<std::int64_t>(s.timeout.count())));
    if (s.dimension <= 0) {
        throw InvalidArgument("encoder dimension must be positive");
    }
    if (s.kind == EncoderKind::remote && s.endpoint.empty()) {
        throw InvalidArgument("remote encoder requires an endpoint");
    }
    return s;
}

Embedding Encoder::encode(std::string_view text) const
{
    const std::string owned(text);
    return encode_batch(std::span<const std::string>(&owned, 1)).front();
}

std::unique_ptr<Encoder> make_encoder(const EncoderSpec &spec)
{
    if (spec.dimension <= 0) {
        throw InvalidArgument("encoder dimension must be positive");
    }
    if (spec.kind == EncoderKind::remote) {
        return std::make_unique<RemoteEncoder>(spec);
    }
    return std::make_unique<HashedProjectionEncoder>(spec);
}

Embedding encode_hashed(std::string_view text, const EncoderSpec &spec)
{
    if (spec.dimension <= 0) {
        throw InvalidArgument("encoder dimension must be positive");
    }
    const auto dim = static_cast<std::size_t>(spec.dimension);
    const std::size_t buckets = 2 * dim;

    // Sorted so accumulation order (and thus the float result) is fixed.
    std::map<std::string, std::uint32_t> tf;
    const auto tokens = tokenize(text);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        ++tf[tokens[i]];
        if (i + 1 < tokens.size()) {
            ++tf[tokens[i] + ' ' + tokens[i + 1]];
        }
    }

    const std::uint64_t basis = mix64(spec.seed ^ 0xcbf29ce484222325ULL);
    std::vector<double> sparse(buckets, 0.0);
    for (const auto &[feature, count] : tf) {
        const std::uint64_t h = fnv1a64(feature, basis);
        const std::size_t bucket = mix64(h) % buckets;
        const double sign = (mix64(h ^ kSignSalt) & 1u) != 0 ? 1.0 : -1.0;
        sparse[bucket] += sign * std::log1p(static_cast<double>(count));
    }

    std::vector<double> dense(dim, 0.0);
    const std::uint64_t proj_key = mix64(spec.seed ^ kProjectionSalt);
    const std::size_t words = (dim + 63) / 64;
    for (std::size_t i = 0; i < buckets; ++i) {
        const double w = sparse[i];
        if (w == 0.0) {
            continue;
        }
        for (std::size_t word = 0; word < words; ++word) {
            const std::uint64_t bits = mix64(proj_key ^ mix64(i * words + word));
            const std::size_t lim = std::min<std::size_t>(64, dim - word * 64);
            for (std::size_t b = 0; b < lim; ++b) {
                dense[word * 64 + b] += ((bits >> b) & 1u) != 0 ? w : -w;
            }
        }
    }

    double sq = 0.0;
    for (double v : dense) {
        sq += v * v;
    }
    Embedding e;
    e.values.resize(dim);
    if (sq == 0.0) {
        std::fill(e.values.begin(), e.values.end(), 0.0f);
        e.normalized = false;
        return e;
    }
    const double inv = 1.0 / std::sqrt(sq);
    for (std::size_t j = 0; j < dim; ++j) {
        e.values[j] = static_cast<float>(dense[j] * inv);
    }
    e.normalized = true;
    return e;
}

std::vector<Embedding> encode_remote(std::span<const std::string> texts, const EncoderSpec &spec)
{
    if (texts.empty()) {
        return {};
    }
    const auto url = http::parse_url(spec.endpoint);
    http::RequestOptions options;
    options.timeout = spec.timeout;
    if (!spec.auth_env.empty()) {
        const char *token = std::getenv(spec.auth_env.c_str());
        if (token == nullptr || *token == '\0') {
            throw InvalidArgument("environment variable " + spec.auth_env + " (encoder API key) is not set");
        }
        options.headers["Authorization"] = std::string("Bearer ") + token;
    }

    const std::size_t batch = std::max<std::size_t>(1, spec.batch_size);
    const std::size_t nbatches = (texts.size() + batch - 1) / batch;
    std::vector<std::vector<Embedding>> results(nbatches);
    std::vector<std::exception_ptr> errors(nbatches);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t b = next.fetch_add(1); b < nbatches; b = next.fetch_add(1)) {
            try {
                const auto begin = b * batch;
                results[b] = remote_batch(texts.subspan(begin, std::min(batch, texts.size() - begin)), spec, url, options);
            } catch (...) {
                errors[b] = std::current_exception();
            }
        }
    };
    {
        const std::size_t nthreads = std::min(nbatches, std::max<std::size_t>(1, spec.max_connections));
        std::vector<std::jthread> pool;
        for (std::size_t t = 1; t < nthreads; ++t) {
            pool.emplace_back(worker);
        }
        worker();
    }
    for (const auto &err : errors) {
        if (err) {
            std::rethrow_exception(err);
        }
    }
    std::vector<Embedding> out;
    out.reserve(texts.size());
    for (auto &r : results) {
        std::move(r.begin(), r.end(), std::back_inserter(out));
    }
    return out;
}

float dot(std::span<const float> a, std::span<const float> b) noexcept
{
    float s = 0.0f;
    const std::size_t n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) {
        s += a[i] * b[i];
    }
    return s;
}

float cosine(std::span<const float> a, std::span<const float> b) noexcept
{
    const double na = std::sqrt(static_cast<double>(dot(a, a)));
    const double nb = std::sqrt(static_cast<double>(dot(b, b)));
    if (na == 0.0 || nb == 0.0) {
        return 0.0f;
    }
    return static_cast<float>(dot(a, b) / (na * nb));
}

void write_embeddings(const std::filesystem::path &path, std::span<const Embedding> rows)
{
    std::vector<float> flat;
    std::size_t dim = rows.empty() ? 0 : rows.front().dimension();
    flat.reserve(rows.size() * dim);
    for (const auto &r : rows) {
        if (r.dimension() != dim) {
            throw InvalidArgument("embeddings have inconsistent dimensions");
        }
        flat.insert(flat.end(), r.values.begin(), r.values.end());
    }
    write_embedding_matrix(path, flat);
}

void write_embedding_matrix(const std::filesystem::path &path, std::span<const float> values)
{
    std::string bytes;
    bytes.reserve(values.size() * 4);
    for (float v : values) {
        detail::put_le<float>(bytes, v);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw IoError("write failed: " + path.string());
    }
}

std::vector<float> read_embedding_matrix(const std::filesystem::path &path, std::size_t dimension)
{
    if (dimension == 0) {
        throw InvalidArgument("embedding dimension must be positive");
    }
    const MappedFile file(path);
    if (file.size() % (4 * dimension) != 0) {
        throw FormatError(path.string() + " size is not a multiple of " + std::to_string(dimension) + " float32 values");
    }
    std::vector<float> out(file.size() / 4);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = detail::load_le<float>(file.data() + 4 * i);
    }
    return out;
}

} // namespace flexkit
