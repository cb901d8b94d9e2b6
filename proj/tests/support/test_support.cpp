#include "test_support.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "flexkit/dense_index.hpp"
#include "flexkit/encoder.hpp"
#include "flexkit/sparse_index.hpp"

namespace flexkit::testing {

TempDir::TempDir()
{
    auto pattern = (std::filesystem::temp_directory_path() / "flexkit-test-XXXXXX").string();
    if (::mkdtemp(pattern.data()) == nullptr) {
        throw std::runtime_error("mkdtemp failed");
    }
    path_ = pattern;
}

TempDir::~TempDir()
{
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
}

void write_file(const std::filesystem::path &path, std::string_view bytes)
{
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
}

std::string read_file(const std::filesystem::path &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot read " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::move(ss).str();
}

std::filesystem::path data_dir() { return FLEXKIT_TEST_DATA_DIR; }

std::vector<std::string> synthetic_corpus(std::size_t docs, std::size_t vocab, std::size_t min_len,
                                          std::size_t max_len, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    // Zipf weights 1/(r+1)
    std::vector<double> weights(vocab);
    for (std::size_t r = 0; r < vocab; ++r) {
        weights[r] = 1.0 / static_cast<double>(r + 1);
    }
    std::discrete_distribution<std::size_t> word(weights.begin(), weights.end());
    std::uniform_int_distribution<std::size_t> len(min_len, max_len);
    std::vector<std::string> out;
    out.reserve(docs);
    for (std::size_t d = 0; d < docs; ++d) {
        std::string text;
        const auto n = len(rng);
        for (std::size_t i = 0; i < n; ++i) {
            if (i) {
                text += ' ';
            }
            text += "w" + std::to_string(word(rng));
        }
        out.push_back(std::move(text));
    }
    return out;
}

void write_text_store(const std::filesystem::path &path, const std::vector<std::string> &texts)
{
    auto writer = StoreWriter::create(path, {"text"}, {.overwrite = true});
    for (const auto &t : texts) {
        Document doc;
        doc.fields["text"] = t;
        writer.append(doc);
    }
    writer.close();
}

std::vector<float> clustered_vectors(std::size_t n, std::size_t dim, std::size_t clusters, float spread,
                                     std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> gauss(0.0f, 1.0f);
    std::vector<float> centres(clusters * dim);
    for (auto &c : centres) {
        c = gauss(rng);
    }
    std::uniform_int_distribution<std::size_t> pick(0, clusters - 1);
    std::vector<float> out(n * dim);
    for (std::size_t i = 0; i < n; ++i) {
        const auto c = pick(rng);
        for (std::size_t d = 0; d < dim; ++d) {
            out[i * dim + d] = centres[c * dim + d] + spread * gauss(rng);
        }
    }
    return out;
}

RetrieverConfig build_pipeline(const std::filesystem::path &dir, const std::vector<std::string> &texts, int dimension,
                               std::uint64_t seed)
{
    std::filesystem::create_directories(dir);
    write_text_store(dir / "store.fcs", texts);
    StoreReader store(dir / "store.fcs");
    (void)build_sparse_index(store, "text", dir / "bm25.fsi");

    EncoderSpec spec;
    spec.dimension = dimension;
    spec.seed = seed;
    std::vector<float> vectors;
    vectors.reserve(texts.size() * static_cast<std::size_t>(dimension));
    for (const auto &t : texts) {
        const auto e = encode_hashed(t, spec);
        vectors.insert(vectors.end(), e.values.begin(), e.values.end());
    }
    (void)build_flat_index(vectors, static_cast<std::size_t>(dimension), Metric::inner_product, dir / "dense.fdi");

    RetrieverConfig config;
    config.indexes.push_back({.name = "bm25", .field = "text", .type = IndexType::bm25, .path = dir / "bm25.fsi"});
    config.indexes.push_back({.name = "dense", .field = "text", .type = IndexType::flat, .path = dir / "dense.fdi"});
    config.store = dir / "store.fcs";
    config.encoder = spec;
    config.retrieve_k = 50;
    config.final_k = 10;
    return config;
}

} // namespace flexkit::testing
