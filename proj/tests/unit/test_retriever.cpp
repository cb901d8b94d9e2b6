#include <gtest/gtest.h>

#include <algorithm>

#include <json.hpp>

#include "flexkit/dense_index.hpp"
#include "flexkit/errors.hpp"
#include "flexkit/remote_search.hpp"
#include "flexkit/retriever.hpp"
#include "flexkit/tokenizer.hpp"
#include "local_server.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace flexkit;
namespace ft = flexkit::testing;

namespace {

std::vector<DocId> ids(const std::vector<RetrievedContext> &ctx)
{
    std::vector<DocId> out;
    for (const auto &c : ctx) {
        out.push_back(c.doc_id);
    }
    return out;
}

} // namespace

TEST(Fusion, RrfHandTable)
{
    // five docs; "a" ranks 4,1,2 and "b" ranks 0,1
    const std::vector<RankedList> lists = {{"a", 1.0, {{4, 9.0}, {1, 8.0}, {2, 7.0}}}, {"b", 1.0, {{0, 0.9}, {1, 0.8}}}};
    const auto fused = fuse_rrf(lists, 60, 10);
    ASSERT_EQ(fused.size(), 4u);
    EXPECT_EQ(ids(fused), (std::vector<DocId>{1, 0, 4, 2}));
    EXPECT_DOUBLE_EQ(fused[0].fused_score, 1.0 / 62 + 1.0 / 62);
    EXPECT_DOUBLE_EQ(fused[1].fused_score, 1.0 / 61); // rank 1 in "b", absent from "a"
    EXPECT_DOUBLE_EQ(fused[2].fused_score, 1.0 / 61);
    EXPECT_DOUBLE_EQ(fused[3].fused_score, 1.0 / 63);
    EXPECT_EQ(fused[0].sources, (std::set<std::string>{"a", "b"}));
    EXPECT_EQ(fused[0].per_index_scores.at("a"), 8.0);
    EXPECT_EQ(fused[0].per_index_scores.at("b"), 0.8);
    EXPECT_EQ(fused[3].rank, 4u);
}

TEST(Fusion, RrfTopInBothIndexes)
{
    const std::vector<RankedList> lists = {{"a", 1.0, {{3, 1.0}, {0, 0.5}}}, {"b", 1.0, {{3, 2.0}}}};
    const auto fused = fuse_rrf(lists, 60, 1);
    ASSERT_EQ(fused.size(), 1u);
    EXPECT_EQ(fused[0].doc_id, 3u);
    EXPECT_DOUBLE_EQ(fused[0].fused_score, 2.0 / 61);
}

TEST(Fusion, WeightedSumMinMax)
{
    const std::vector<RankedList> lists = {{"a", 1.0, {{4, 10.0}, {1, 5.0}, {2, 0.0}}}, {"b", 1.0, {{0, 3.0}, {1, 1.0}}}};
    const auto fused = fuse_weighted_sum(lists, 10);
    EXPECT_EQ(ids(fused), (std::vector<DocId>{0, 4, 1, 2}));
    EXPECT_DOUBLE_EQ(fused[0].fused_score, 1.0);
    EXPECT_DOUBLE_EQ(fused[2].fused_score, 0.5);
    EXPECT_DOUBLE_EQ(fused[3].fused_score, 0.0);
}

TEST(Fusion, WeightedSumDisjointSingletonsTie)
{
    const std::vector<RankedList> lists = {{"a", 1.0, {{3, 7.0}}}, {"b", 1.0, {{1, 2.0}}}};
    const auto fused = fuse_weighted_sum(lists, 10);
    EXPECT_EQ(ids(fused), (std::vector<DocId>{1, 3}));
    EXPECT_DOUBLE_EQ(fused[0].fused_score, fused[1].fused_score);

    const std::vector<RankedList> weighted = {{"a", 3.0, {{3, 7.0}}}, {"b", 1.0, {{1, 2.0}}}};
    const auto w = fuse_weighted_sum(weighted, 10);
    EXPECT_EQ(ids(w), (std::vector<DocId>{3, 1}));
    EXPECT_DOUBLE_EQ(w[0].fused_score, 3.0);
}

TEST(Fusion, EmptyListsAndTruncation)
{
    const std::vector<RankedList> lists = {{"a", 1.0, {}}, {"b", 1.0, {{5, 1.0}, {6, 0.5}, {7, 0.1}}}};
    EXPECT_EQ(fuse_rrf(lists, 60, 2).size(), 2u);
    EXPECT_EQ(fuse_weighted_sum(lists, 2).size(), 2u);
    EXPECT_TRUE(fuse_rrf(std::vector<RankedList>{}, 60, 3).empty());
}

TEST(Rerank, MatchesBruteForceF1)
{
    const std::vector<std::string> texts = {
        "the cat sat on the mat",      "dogs chase cats",          "a mat for a cat",
        "nothing relevant here",       "cat cat cat",              "sat on a mat the cat did",
        "the quick brown fox",         "mats and hats",            "on the mat",
        "the cat"};
    std::vector<RetrievedContext> ctx;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        RetrievedContext c;
        c.doc_id = i;
        c.text = texts[i];
        c.fused_score = 1.0 / static_cast<double>(i + 1);
        ctx.push_back(c);
    }
    const std::string query = "the cat on the mat";

    std::vector<std::pair<double, DocId>> want;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        want.emplace_back(ft::overlap_f1_ref(tokenize(query), tokenize(texts[i])), i);
    }
    // ties keep fused order, which here is ascending doc id
    std::sort(want.begin(), want.end(), [](auto &a, auto &b) { return a.first != b.first ? a.first > b.first : a.second < b.second; });

    const auto got = rerank_lexical(query, ctx, 5);
    ASSERT_EQ(got.size(), 5u);
    for (std::size_t i = 0; i < 5; ++i) {
        EXPECT_EQ(got[i].doc_id, want[i].second);
        EXPECT_DOUBLE_EQ(got[i].fused_score, want[i].first);
        EXPECT_EQ(got[i].rank, i + 1);
    }
    EXPECT_THROW((void)rerank_lexical(query, ctx, 11), InvalidArgument);
}

TEST(Rerank, OverlapF1ByHand)
{
    const std::vector<std::string> a = {"a", "b", "b"};
    const std::vector<std::string> b = {"b", "c"};
    // common 1, p = 1/2, r = 1/3
    EXPECT_DOUBLE_EQ(overlap_f1(a, b), 2.0 * 0.5 / 3.0 / (0.5 + 1.0 / 3.0));
    EXPECT_EQ(overlap_f1(a, {}), 0.0);
}

TEST(RetrieverConfig, ValidateCollectsEveryProblem)
{
    RetrieverConfig c;
    c.final_k = 20;
    c.retrieve_k = 10;
    c.reranker = "lexical";
    c.indexes.push_back({.name = "x", .type = IndexType::flat});
    try {
        c.validate();
        FAIL();
    } catch (const InvalidArgument &e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("final_k"), std::string::npos);
        EXPECT_NE(msg.find("store"), std::string::npos);
        EXPECT_NE(msg.find("encoder"), std::string::npos);
        EXPECT_NE(msg.find("path"), std::string::npos);
    }
}

TEST(RetrieverConfig, JsonRoundTripResolvesRelativePaths)
{
    const auto j = nlohmann::json::parse(R"({
        "indexes": [{"name": "bm25", "type": "bm25", "path": "i/bm25.fsi"},
                    {"name": "d", "type": "ivfpq", "path": "/abs/d.fdi", "nprobe": 8}],
        "store": "s.fcs", "fusion": "weighted_sum", "weights": [1, 2],
        "retrieve_k": 30, "final_k": 5, "encoder": {"dimension": 32, "seed": 1},
        "refine": {"strategy": "sandwich", "token_budget": 100}})");
    const auto c = RetrieverConfig::from_json(j, "/base");
    EXPECT_EQ(c.indexes[0].path, std::filesystem::path("/base/i/bm25.fsi"));
    EXPECT_EQ(c.indexes[1].path, std::filesystem::path("/abs/d.fdi"));
    EXPECT_EQ(c.indexes[1].nprobe, 8u);
    EXPECT_EQ(c.store, std::filesystem::path("/base/s.fcs"));
    EXPECT_EQ(c.fusion, Fusion::weighted_sum);
    EXPECT_EQ(c.weight(1), 2.0);
    EXPECT_EQ(c.refine.strategy, RepackStrategy::sandwich);
    const auto again = RetrieverConfig::from_json(c.to_json());
    EXPECT_EQ(again.to_json(), c.to_json());
    EXPECT_FALSE(c.to_json(false).dump().find("bm25.fsi") != std::string::npos);
    EXPECT_THROW((void)RetrieverConfig::from_json(nlohmann::json::parse(R"({"indexes": 3})")), InvalidArgument);
}

namespace {

struct PipelineFixture {
    ft::TempDir dir;
    std::vector<std::string> texts = ft::synthetic_corpus(120, 200, 5, 40, 42);
    RetrieverConfig config = ft::build_pipeline(dir.path(), texts);
    std::vector<std::string> queries = ft::synthetic_corpus(30, 200, 2, 6, 43);
};

} // namespace

TEST(Retriever, RetrievesFusedContextsWithText)
{
    PipelineFixture f;
    Retriever r(f.config);
    for (const auto &q : f.queries) {
        const auto res = r.retrieve(q, 10);
        ASSERT_LE(res.size(), 10u);
        ASSERT_FALSE(res.empty());
        for (std::size_t i = 0; i < res.size(); ++i) {
            EXPECT_EQ(res[i].rank, i + 1);
            EXPECT_EQ(res[i].text, f.texts[res[i].doc_id]);
            if (i > 0) {
                EXPECT_GE(res[i - 1].fused_score, res[i].fused_score);
            }
        }
    }
}

TEST(Retriever, EqualsManualFusionOfCandidates)
{
    PipelineFixture f;
    Retriever r(f.config);
    for (const auto &q : f.queries) {
        const auto lists = r.candidates(q);
        ASSERT_EQ(lists.size(), 2u);
        EXPECT_EQ(lists[0].name, "bm25");
        EXPECT_LE(lists[1].hits.size(), 50u);
        EXPECT_EQ(ids(r.retrieve(q, 10)), ids(fuse_rrf(lists, 60, 10)));
    }
}

TEST(Retriever, LexicalRerankOverRetrieveK)
{
    PipelineFixture f;
    f.config.reranker = "lexical";
    Retriever r(f.config);
    for (const auto &q : f.queries) {
        auto pool = fuse_rrf(r.candidates(q), 60, 50);
        std::vector<std::pair<double, std::size_t>> want;
        for (std::size_t i = 0; i < pool.size(); ++i) {
            want.emplace_back(ft::overlap_f1_ref(tokenize(q), tokenize(f.texts[pool[i].doc_id])), i);
        }
        std::stable_sort(want.begin(), want.end(), [](auto &a, auto &b) { return a.first > b.first; });
        const auto got = r.retrieve(q, 5);
        ASSERT_EQ(got.size(), std::min<std::size_t>(5, pool.size()));
        for (std::size_t i = 0; i < got.size(); ++i) {
            EXPECT_EQ(got[i].doc_id, pool[want[i].second].doc_id) << q;
        }
    }
}

TEST(Retriever, KBounds)
{
    PipelineFixture f;
    Retriever r(f.config);
    EXPECT_THROW((void)r.retrieve("w1", 0), InvalidArgument);
    EXPECT_THROW((void)r.retrieve("w1", 51), InvalidArgument);
    EXPECT_NO_THROW((void)r.retrieve("w1", 50));
}

TEST(Retriever, ProbeCounter)
{
    PipelineFixture f;
    Retriever r(f.config);
    (void)r.retrieve(f.queries[0], 5);
    (void)r.retrieve(f.queries[1], 5);
    EXPECT_EQ(r.index_probes(), 4u);
    r.reset_index_probes();
    EXPECT_EQ(r.index_probes(), 0u);
}

TEST(Retriever, BatchEqualsSequential)
{
    PipelineFixture f;
    Retriever r(f.config);
    std::vector<std::vector<RetrievedContext>> seq;
    for (const auto &q : f.queries) {
        seq.push_back(r.retrieve(q, 10));
    }
    for (std::size_t c : {1u, 3u, 8u}) {
        for (bool tp : {true, false}) {
            EXPECT_EQ(r.retrieve_batch(f.queries, 10, {.concurrency = c, .tokenizer_parallel = tp}), seq);
        }
    }
    EXPECT_TRUE(r.retrieve_batch({}, 10).empty());
}

TEST(Retriever, FingerprintTracksConfigAndContent)
{
    PipelineFixture f;
    const auto base = Retriever(f.config).fingerprint();
    EXPECT_EQ(Retriever(f.config).fingerprint(), base);

    auto other = f.config;
    other.rrf_c = 10;
    EXPECT_NE(Retriever(other).fingerprint(), base);

    // same layout, different corpus
    ft::TempDir dir2;
    auto texts = f.texts;
    texts[0] = "something entirely different";
    const auto moved = ft::build_pipeline(dir2.path(), texts);
    EXPECT_NE(Retriever(moved).fingerprint(), base);

    // identical content elsewhere on disk
    ft::TempDir dir3;
    EXPECT_EQ(Retriever(ft::build_pipeline(dir3.path(), f.texts)).fingerprint(), base);
}

TEST(Retriever, ConstructionChecks)
{
    PipelineFixture f;
    auto bad_field = f.config;
    bad_field.indexes[0].field = "title";
    EXPECT_THROW((void)Retriever(bad_field), InvalidArgument);

    auto bad_kind = f.config;
    bad_kind.indexes[1].type = IndexType::ivfpq;
    EXPECT_THROW((void)Retriever(bad_kind), InvalidArgument);

    auto bad_dim = f.config;
    bad_dim.encoder->dimension = 32;
    EXPECT_THROW((void)Retriever(bad_dim), InvalidArgument);

    auto missing = f.config;
    missing.indexes[0].path = f.dir / "nope.fsi";
    EXPECT_THROW((void)Retriever(missing), IoError);
}

TEST(Retriever, WithoutStoreTextIsEmpty)
{
    PipelineFixture f;
    f.config.store.clear();
    Retriever r(f.config);
    EXPECT_EQ(r.store(), nullptr);
    for (const auto &c : r.retrieve(f.queries[0], 5)) {
        EXPECT_TRUE(c.text.empty());
    }
}

namespace {

// Remote index: echoes hits for docs 0..2, fails with 404 on the query "boom".
struct MockSearch {
    ft::LocalServer srv;
    MockSearch()
    {
        srv.server().Post("/search", [](const httplib::Request &req, httplib::Response &res) {
            const auto body = nlohmann::json::parse(req.body);
            if (body["query"] == "boom") {
                res.status = 404;
                return;
            }
            nlohmann::json out;
            out["hits"] = {{{"id", 2}, {"score", 0.5}}, {{"id", 0}, {"score", 0.9}}, {{"id", 1}, {"score", 0.1}}};
            res.set_content(out.dump(), "application/json");
        });
        srv.start();
    }
};

} // namespace

TEST(RemoteSearch, ParsesAndSortsHits)
{
    MockSearch mock;
    RemoteSearchClient client(mock.srv.url("/search"));
    const auto hits = client.search("x", 2);
    ASSERT_EQ(hits.size(), 2u);
    EXPECT_EQ(hits[0], (SearchHit{0, 0.9}));
    EXPECT_EQ(hits[1], (SearchHit{2, 0.5}));
    EXPECT_THROW((void)client.search("boom", 2), IoError);
    EXPECT_EQ(client.identity(), RemoteSearchClient(mock.srv.url("/search")).identity());
}

TEST(Retriever, BatchErrorCarriesQueryIndex)
{
    MockSearch mock;
    PipelineFixture f;
    f.config.indexes.push_back({.name = "remote", .field = "text", .type = IndexType::remote, .endpoint = mock.srv.url("/search")});
    Retriever r(f.config);
    const auto res = r.retrieve("w1 w2", 5);
    EXPECT_TRUE(std::any_of(res.begin(), res.end(), [](const auto &c) { return c.sources.count("remote") > 0; }));

    std::vector<std::string> qs = {"w1", "w2", "boom", "w3", "boom"};
    try {
        (void)r.retrieve_batch(qs, 5, {.concurrency = 3});
        FAIL();
    } catch (const BatchError &e) {
        EXPECT_EQ(e.query_index(), 2u);
    }
}
