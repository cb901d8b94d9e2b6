#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "flexkit/dense_index.hpp"
#include "flexkit/errors.hpp"
#include "flexkit/kmeans.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace flexkit;
namespace ft = flexkit::testing;

TEST(KMeans, ObjectiveNeverIncreases)
{
    const auto data = ft::clustered_vectors(600, 8, 6, 0.5f, 4);
    const auto r = kmeans(data, 8, {.k = 6, .max_iter = 30, .seed = 1, .tolerance = 0.0});
    ASSERT_FALSE(r.objective.empty());
    for (std::size_t i = 1; i < r.objective.size(); ++i) {
        EXPECT_LE(r.objective[i], r.objective[i - 1] * (1.0 + 1e-9));
    }
    EXPECT_EQ(r.centroids.size(), 6u * 8u);
}

TEST(KMeans, RecoversSeparatedClusters)
{
    // four tight blobs at the corners of a square
    std::vector<float> data;
    const float corners[4][2] = {{0, 0}, {100, 0}, {0, 100}, {100, 100}};
    for (int c = 0; c < 4; ++c) {
        for (int i = 0; i < 25; ++i) {
            data.push_back(corners[c][0] + static_cast<float>(i % 5) * 0.1f);
            data.push_back(corners[c][1] + static_cast<float>(i / 5) * 0.1f);
        }
    }
    const auto r = kmeans(data, 2, {.k = 4, .seed = 3});
    std::set<std::pair<int, int>> found;
    for (std::size_t c = 0; c < 4; ++c) {
        found.emplace(static_cast<int>(std::lround(r.centroids[2 * c] / 100.0f)),
                      static_cast<int>(std::lround(r.centroids[2 * c + 1] / 100.0f)));
    }
    EXPECT_EQ(found.size(), 4u);
}

TEST(KMeans, DeterministicPerSeed)
{
    const auto data = ft::clustered_vectors(200, 4, 3, 1.0f, 8);
    const auto a = kmeans(data, 4, {.k = 5, .seed = 11});
    const auto b = kmeans(data, 4, {.k = 5, .seed = 11});
    EXPECT_EQ(a.centroids, b.centroids);
}

TEST(KMeans, RejectsBadK)
{
    const std::vector<float> data(10, 1.0f);
    EXPECT_THROW((void)kmeans(data, 2, {.k = 6}), InvalidArgument);
    EXPECT_THROW((void)kmeans(data, 2, {.k = 0}), InvalidArgument);
}

TEST(KMeans, DuplicatePointsStillYieldKCentroids)
{
    std::vector<float> data(40, 0.0f);
    data[0] = 5.0f;
    const auto r = kmeans(data, 2, {.k = 3, .seed = 2});
    EXPECT_EQ(r.centroids.size(), 6u);
    for (float v : r.centroids) {
        EXPECT_TRUE(std::isfinite(v));
    }
}

TEST(KMeans, NearestCentroidTiesToLowerIndex)
{
    const std::vector<float> cents = {1, 0, -1, 0, 0, 1};
    const float x[2] = {0, 0};
    EXPECT_EQ(nearest_centroid(x, cents, 2).first, 0u);
    EXPECT_FLOAT_EQ(l2_sq(cents.data(), cents.data() + 2, 2), 4.0f);
}

TEST(SizeIvfPq, SizingRuleByHand)
{
    auto p = size_ivfpq(50000, 64);
    EXPECT_EQ(p.nlist, 894u); // round(4 * 223.607)
    EXPECT_EQ(p.nprobe, 112u); // round(894 / 8)
    EXPECT_EQ(p.m, 16u);
    EXPECT_EQ(p.nbits, 8u);

    p = size_ivfpq(100, 10);
    EXPECT_EQ(p.nlist, 2u); // capped at 100 / 39
    EXPECT_EQ(p.nprobe, 1u);
    EXPECT_EQ(p.m, 2u);

    p = size_ivfpq(1, 3);
    EXPECT_EQ(p.nlist, 1u);
    EXPECT_EQ(p.m, 1u);

    p = size_ivfpq(1000000, 768);
    EXPECT_EQ(p.nlist, 4000u);
    EXPECT_EQ(p.nprobe, 500u);
    EXPECT_EQ(p.m, 64u);
    EXPECT_NO_THROW(p.validate(768, 1000000));
}

TEST(IvfPqParams, Validate)
{
    IvfPqParams p{.nlist = 4, .nprobe = 2, .m = 4, .nbits = 8};
    EXPECT_NO_THROW(p.validate(16, 100));
    EXPECT_THROW(p.validate(18, 100), InvalidArgument);
    EXPECT_THROW(p.validate(16, 3), InvalidArgument);
    p.nprobe = 5;
    EXPECT_THROW(p.validate(16, 100), InvalidArgument);
    p.nprobe = 1;
    p.nbits = 6;
    EXPECT_THROW(p.validate(16, 100), InvalidArgument);
}

TEST(FlatIndex, MatchesBruteForce)
{
    ft::TempDir dir;
    const std::size_t dim = 12;
    const auto data = ft::clustered_vectors(500, dim, 10, 0.3f, 5);
    const auto queries = ft::clustered_vectors(20, dim, 10, 0.3f, 6);
    for (Metric metric : {Metric::inner_product, Metric::l2}) {
        (void)build_flat_index(data, dim, metric, dir / "flat");
        FlatIndex idx(dir / "flat");
        EXPECT_EQ(idx.size(), 500u);
        EXPECT_EQ(idx.metric(), metric);
        for (std::size_t q = 0; q < 20; ++q) {
            const auto got = idx.search(std::span<const float>(queries.data() + q * dim, dim), 7);
            const auto want = ft::brute_force_knn(data, dim, queries.data() + q * dim, 7, metric == Metric::l2);
            ASSERT_EQ(got.size(), want.size());
            for (std::size_t i = 0; i < got.size(); ++i) {
                EXPECT_EQ(got[i].doc_id, want[i].doc);
                EXPECT_NEAR(got[i].score, want[i].score, 1e-4);
            }
        }
    }
}

TEST(FlatIndex, StoresVectorsVerbatim)
{
    ft::TempDir dir;
    const auto data = ft::clustered_vectors(5, 3, 1, 1.0f, 2);
    (void)build_flat_index(data, 3, Metric::l2, dir / "flat");
    FlatIndex idx(dir / "flat");
    const auto v = idx.vector(4);
    EXPECT_TRUE(std::equal(v.begin(), v.end(), data.begin() + 12));
    EXPECT_THROW((void)idx.vector(5), NotFound);
}

TEST(FlatIndex, QueryChecks)
{
    ft::TempDir dir;
    const std::vector<float> data = {1, 0, 0, 1};
    (void)build_flat_index(data, 2, Metric::inner_product, dir / "flat");
    FlatIndex idx(dir / "flat");
    const std::vector<float> bad = {1, 2, 3};
    EXPECT_THROW((void)idx.search(bad, 1), InvalidArgument);
    const std::vector<float> q = {1, 0};
    EXPECT_THROW((void)idx.search(q, 0), InvalidArgument);
    EXPECT_EQ(idx.search(q, 10).size(), 2u);
}

namespace {

struct IvfFixture {
    ft::TempDir dir;
    std::size_t dim = 16;
    std::vector<float> data = ft::clustered_vectors(2000, 16, 20, 0.4f, 21);
    IvfPqParams params{.nlist = 16, .nprobe = 4, .m = 4, .nbits = 8};

    std::filesystem::path build(const std::string &name = "ivf", std::uint64_t seed = 1)
    {
        (void)build_ivfpq_index(data, dim, params, seed, dir / name);
        return dir / name;
    }
};

} // namespace

TEST(IvfPqIndex, ListsPartitionTheCorpus)
{
    IvfFixture f;
    IvfPqIndex idx(f.build());
    EXPECT_EQ(idx.size(), 2000u);
    EXPECT_EQ(idx.params().nlist, 16u);
    std::vector<int> seen(2000, 0);
    std::size_t total = 0;
    for (std::size_t l = 0; l < 16; ++l) {
        const auto ids = idx.list_ids(l);
        EXPECT_EQ(ids.size(), idx.list_size(l));
        EXPECT_EQ(idx.list_codes(l).size(), ids.size() * idx.params().code_size());
        for (auto id : ids) {
            ++seen[id];
        }
        total += ids.size();
    }
    EXPECT_EQ(total, 2000u);
    EXPECT_TRUE(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
}

TEST(IvfPqIndex, EachVectorLivesInItsBestList)
{
    IvfFixture f;
    for (Metric metric : {Metric::inner_product, Metric::l2}) {
        f.params.metric = metric;
        IvfPqIndex idx(f.build());
        for (std::size_t l = 0; l < 16; ++l) {
            for (auto id : idx.list_ids(l)) {
                const float *x = f.data.data() + std::size_t{id} * f.dim;
                std::size_t best = 0;
                for (std::size_t c = 1; c < 16; ++c) {
                    if (similarity(x, idx.coarse_centroid(c).data(), f.dim, metric) >
                        similarity(x, idx.coarse_centroid(best).data(), f.dim, metric)) {
                        best = c;
                    }
                }
                EXPECT_EQ(best, l);
            }
        }
    }
}

TEST(IvfPqIndex, AdcEqualsSimilarityToReconstruction)
{
    IvfFixture f;
    for (Metric metric : {Metric::inner_product, Metric::l2}) {
        f.params.metric = metric;
        IvfPqIndex idx(f.build());
        const auto q = ft::clustered_vectors(1, f.dim, 1, 1.0f, 77);
        for (std::size_t l = 0; l < 16; l += 5) {
            for (std::size_t pos = 0; pos < std::min<std::size_t>(idx.list_size(l), 10); ++pos) {
                const auto code = idx.code(l, pos);
                const auto rec = idx.reconstruct(l, code);
                EXPECT_NEAR(idx.adc_score(q, l, code), similarity(q.data(), rec.data(), f.dim, metric), 1e-3);
            }
        }
    }
}

TEST(IvfPqIndex, ReconstructionIsClose)
{
    IvfFixture f;
    IvfPqIndex idx(f.build());
    double err = 0.0;
    double energy = 0.0;
    for (std::size_t l = 0; l < 16; ++l) {
        const auto ids = idx.list_ids(l);
        for (std::size_t pos = 0; pos < ids.size(); ++pos) {
            const auto rec = idx.reconstruct(l, idx.code(l, pos));
            err += l2_sq(rec.data(), f.data.data() + ids[pos] * f.dim, f.dim);
            const std::vector<float> zero(f.dim, 0.0f);
            energy += l2_sq(zero.data(), f.data.data() + ids[pos] * f.dim, f.dim);
        }
    }
    EXPECT_LT(err / energy, 0.05);
}

TEST(IvfPqIndex, FullProbeEqualsExhaustiveAdc)
{
    IvfFixture f;
    IvfPqIndex idx(f.build());
    const auto q = ft::clustered_vectors(1, f.dim, 1, 1.0f, 31);
    std::vector<SearchHit> all;
    for (std::size_t l = 0; l < 16; ++l) {
        const auto ids = idx.list_ids(l);
        for (std::size_t pos = 0; pos < ids.size(); ++pos) {
            all.push_back({ids[pos], idx.adc_score(q, l, idx.code(l, pos))});
        }
    }
    keep_top_k(all, 10);
    const auto got = idx.search(q, 10, 16);
    ASSERT_EQ(got.size(), 10u);
    for (std::size_t i = 0; i < 10; ++i) {
        EXPECT_EQ(got[i].doc_id, all[i].doc_id);
        EXPECT_NEAR(got[i].score, all[i].score, 1e-4);
    }
}

TEST(IvfPqIndex, RecallGrowsWithNprobe)
{
    IvfFixture f;
    IvfPqIndex idx(f.build());
    const auto queries = ft::clustered_vectors(50, f.dim, 20, 0.4f, 21);
    auto recall = [&](std::size_t nprobe) {
        double hits = 0.0;
        for (std::size_t q = 0; q < 50; ++q) {
            const std::span<const float> qv(queries.data() + q * f.dim, f.dim);
            const auto want = ft::brute_force_knn(f.data, f.dim, qv.data(), 10);
            const auto got = idx.search(qv, 10, nprobe);
            for (const auto &w : want) {
                hits += std::any_of(got.begin(), got.end(), [&](const SearchHit &h) { return h.doc_id == w.doc; });
            }
        }
        return hits / 500.0;
    };
    const double r1 = recall(1);
    const double r4 = recall(4);
    const double r16 = recall(16);
    EXPECT_LE(r1, r4 + 1e-9);
    EXPECT_LE(r4, r16 + 1e-9);
    EXPECT_GE(r16, 0.5);
}

TEST(IvfPqIndex, ProbeOrderIsByCentroidSimilarity)
{
    IvfFixture f;
    IvfPqIndex idx(f.build());
    const auto q = ft::clustered_vectors(1, f.dim, 1, 1.0f, 5);
    const auto order = idx.probe_order(q, 16);
    ASSERT_EQ(order.size(), 16u);
    for (std::size_t i = 1; i < order.size(); ++i) {
        EXPECT_GE(similarity(q.data(), idx.coarse_centroid(order[i - 1]).data(), f.dim, Metric::inner_product),
                  similarity(q.data(), idx.coarse_centroid(order[i]).data(), f.dim, Metric::inner_product));
    }
}

TEST(IvfPqIndex, SeededBuildsAreByteIdentical)
{
    IvfFixture f;
    const auto a = f.build("a", 5);
    const auto b = f.build("b", 5);
    EXPECT_EQ(ft::read_file(a), ft::read_file(b));
    const auto c = f.build("c", 6);
    EXPECT_NE(IvfPqIndex(c).build_id(), IvfPqIndex(a).build_id());
    EXPECT_EQ(IvfPqIndex(a).seed(), 5u);
}

TEST(IvfPqIndex, FourBitCodesPackTwoPerByte)
{
    IvfFixture f;
    f.params.nbits = 4;
    f.params.m = 8;
    IvfPqIndex idx(f.build());
    EXPECT_EQ(idx.params().code_size(), 4u);
    for (std::size_t pos = 0; pos < idx.list_size(0); ++pos) {
        for (auto c : idx.code(0, pos)) {
            EXPECT_LT(c, 16u);
        }
    }
    const auto q = ft::clustered_vectors(1, f.dim, 1, 1.0f, 9);
    EXPECT_EQ(idx.search(q, 5, 16).size(), 5u);
}

TEST(IvfPqIndex, UndersizedTrainingIsReported)
{
    ft::TempDir dir;
    const auto data = ft::clustered_vectors(100, 8, 4, 0.5f, 3);
    const auto stats = build_ivfpq_index(data, 8, {.nlist = 10, .nprobe = 2, .m = 2, .nbits = 4}, 1, dir / "x");
    EXPECT_TRUE(stats.undersized_training);
    EXPECT_EQ(stats.training_samples, 100u);
}

TEST(DenseIndex, OpenDispatchesOnHeader)
{
    IvfFixture f;
    EXPECT_EQ(open_dense_index(f.build())->kind(), DenseKind::ivfpq);
    (void)build_flat_index(f.data, f.dim, Metric::inner_product, f.dir / "flat");
    EXPECT_EQ(open_dense_index(f.dir / "flat")->kind(), DenseKind::flat);
    ft::write_file(f.dir / "junk", std::string(5000, 'x'));
    EXPECT_THROW((void)open_dense_index(f.dir / "junk"), FormatError);
    EXPECT_THROW((void)FlatIndex(f.dir / "ivf"), FormatError);
}

TEST(DenseIndex, MetricNames)
{
    EXPECT_EQ(parse_metric("ip"), Metric::inner_product);
    EXPECT_EQ(parse_metric("l2"), Metric::l2);
    EXPECT_THROW((void)parse_metric("cosine-ish"), InvalidArgument);
}
