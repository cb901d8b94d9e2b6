#include <benchmark/benchmark.h>

#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "flexkit/corpus_store.hpp"
#include "flexkit/dense_index.hpp"
#include "flexkit/encoder.hpp"
#include "flexkit/retriever.hpp"
#include "flexkit/sparse_index.hpp"
#include "flexkit/tokenizer.hpp"

using namespace flexkit;
namespace fs = std::filesystem;

namespace {

// Index files shared across benchmark runs; removed at exit.
struct ScratchDir {
    ScratchDir()
    {
        auto pattern = (fs::temp_directory_path() / "flexkit-bench-XXXXXX").string();
        if (::mkdtemp(pattern.data()) == nullptr) {
            std::abort();
        }
        path = pattern;
    }
    ~ScratchDir()
    {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    fs::path path;
};

const fs::path &scratch_dir()
{
    static const ScratchDir dir;
    return dir.path;
}

std::vector<std::string> corpus(std::size_t docs, std::uint64_t seed = 1)
{
    std::mt19937_64 rng(seed);
    std::vector<double> weights(5000);
    for (std::size_t r = 0; r < weights.size(); ++r) {
        weights[r] = 1.0 / static_cast<double>(r + 1);
    }
    std::discrete_distribution<std::size_t> word(weights.begin(), weights.end());
    std::uniform_int_distribution<std::size_t> len(20, 150);
    std::vector<std::string> out(docs);
    for (auto &text : out) {
        for (std::size_t i = len(rng); i > 0; --i) {
            text += "w" + std::to_string(word(rng)) + ' ';
        }
    }
    return out;
}

std::vector<float> gaussian(std::size_t n, std::size_t dim, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> g;
    std::vector<float> v(n * dim);
    for (auto &x : v) {
        x = g(rng);
    }
    return v;
}

const std::vector<std::string> kQueries = {"w1 w20", "w300 w7 w4000", "w15", "w2 w3 w4 w5", "w999 w1000"};

} // namespace

static void BM_Tokenize(benchmark::State &state)
{
    const auto docs = corpus(64);
    std::size_t bytes = 0;
    for (auto _ : state) {
        for (const auto &d : docs) {
            benchmark::DoNotOptimize(tokenize(d));
            bytes += d.size();
        }
    }
    state.SetBytesProcessed(static_cast<std::int64_t>(bytes));
}
BENCHMARK(BM_Tokenize);

static void BM_EncodeHashed(benchmark::State &state)
{
    const auto docs = corpus(64);
    EncoderSpec spec;
    spec.dimension = static_cast<int>(state.range(0));
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(encode_hashed(docs[i++ % docs.size()], spec));
    }
}
BENCHMARK(BM_EncodeHashed)->Arg(64)->Arg(256);

static void BM_Bm25Search(benchmark::State &state)
{
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto path = scratch_dir() / ("bm25-" + std::to_string(n) + ".fsi");
    if (!fs::exists(path)) {
        Bm25Builder builder;
        for (const auto &d : corpus(n)) {
            builder.add(d);
        }
        builder.write(path);
    }
    Bm25Index index(path);
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(index.search(kQueries[i++ % kQueries.size()], 10));
    }
}
BENCHMARK(BM_Bm25Search)->Arg(1000)->Arg(20000)->Unit(benchmark::kMicrosecond);

static void BM_FlatSearch(benchmark::State &state)
{
    constexpr std::size_t kDim = 64;
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto path = scratch_dir() / ("flat-" + std::to_string(n) + ".fdi");
    if (!fs::exists(path)) {
        build_flat_index(gaussian(n, kDim, 2), kDim, Metric::inner_product, path);
    }
    FlatIndex index(path);
    const auto q = gaussian(1, kDim, 3);
    for (auto _ : state) {
        benchmark::DoNotOptimize(index.search(q, 10));
    }
}
BENCHMARK(BM_FlatSearch)->Arg(10000)->Arg(50000)->Unit(benchmark::kMicrosecond);

// Arg is nprobe; the index is auto-sized for 20k vectors
static void BM_IvfPqSearch(benchmark::State &state)
{
    constexpr std::size_t kDim = 64;
    constexpr std::size_t kN = 20000;
    const auto path = scratch_dir() / "ivfpq.fdi";
    if (!fs::exists(path)) {
        auto params = size_ivfpq(kN, kDim);
        params.train_iters = 8;
        build_ivfpq_index(gaussian(kN, kDim, 4), kDim, params, 1, path);
    }
    IvfPqIndex index(path);
    const auto q = gaussian(1, kDim, 5);
    const auto nprobe = std::min<std::size_t>(static_cast<std::size_t>(state.range(0)), index.params().nlist);
    for (auto _ : state) {
        benchmark::DoNotOptimize(index.search(q, 10, nprobe));
    }
}
BENCHMARK(BM_IvfPqSearch)->Arg(1)->Arg(8)->Arg(64)->Unit(benchmark::kMicrosecond);

static void BM_FuseRrf(benchmark::State &state)
{
    const auto depth = static_cast<std::size_t>(state.range(0));
    std::mt19937_64 rng(6);
    std::uniform_int_distribution<DocId> doc(0, depth * 4);
    std::vector<RankedList> lists(3);
    for (std::size_t l = 0; l < lists.size(); ++l) {
        lists[l].name = "ix" + std::to_string(l);
        for (std::size_t r = 0; r < depth; ++r) {
            lists[l].hits.push_back({doc(rng), static_cast<double>(depth - r)});
        }
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(fuse_rrf(lists, 60, 10));
    }
}
BENCHMARK(BM_FuseRrf)->Arg(100)->Arg(1000);

static void BM_StoreGet(benchmark::State &state)
{
    const auto path = scratch_dir() / "store.fcs";
    const auto docs = corpus(5000);
    if (!fs::exists(path)) {
        auto writer = StoreWriter::create(path, {"text"});
        for (const auto &d : docs) {
            Document doc;
            doc.fields["text"] = d;
            writer.append(doc);
        }
        writer.close();
    }
    StoreReader store(path);
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<DocId> pick(0, docs.size() - 1);
    for (auto _ : state) {
        benchmark::DoNotOptimize(store.get(pick(rng)));
    }
}
BENCHMARK(BM_StoreGet);

BENCHMARK_MAIN();
