#include <gtest/gtest.h>

#include <random>
#include <thread>

#include "flexkit/errors.hpp"
#include "flexkit/query_cache.hpp"
#include "flexkit/retriever.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace flexkit;
namespace ft = flexkit::testing;

namespace {

Digest128 key_of(const std::string &name) { return digest128({"test-key", name}); }

std::vector<RetrievedContext> results_for(const std::string &name)
{
    RetrievedContext c;
    c.doc_id = name.size();
    c.fused_score = 0.1 + 1.0 / 3.0;
    c.rank = 1;
    c.per_index_scores["bm25"] = 12.345678901234567;
    c.sources = {"bm25"};
    c.text = "text of " + name + " \xc3\xa9";
    return {c};
}

std::vector<std::string> names(const std::vector<Digest128> &keys, const std::map<std::string, std::string> &by_hex)
{
    std::vector<std::string> out;
    for (const auto &k : keys) {
        out.push_back(by_hex.at(k.hex()));
    }
    return out;
}

} // namespace

TEST(NormalizeQuery, WhitespaceAndNfc)
{
    EXPECT_EQ(normalize_query("  who   wrote\t\nhamlet  "), "who wrote hamlet");
    EXPECT_EQ(normalize_query("cafe\xcc\x81"), "caf\xc3\xa9");
    EXPECT_EQ(normalize_query("Case Kept"), "Case Kept");
}

TEST(QueryCacheKey, EquivalentQueriesShareAKey)
{
    const auto fp = digest128({"fp"});
    EXPECT_EQ(QueryCache::make_key(fp, "a  b", 5), QueryCache::make_key(fp, " a b ", 5));
    EXPECT_NE(QueryCache::make_key(fp, "a b", 5), QueryCache::make_key(fp, "a b", 6));
    EXPECT_NE(QueryCache::make_key(fp, "a b", 5), QueryCache::make_key(digest128({"fp2"}), "a b", 5));
    EXPECT_NE(QueryCache::make_key(fp, "A b", 5), QueryCache::make_key(fp, "a b", 5));
}

TEST(QueryCache, RoundTripIsExact)
{
    ft::TempDir dir;
    QueryCache cache(dir / "c");
    const auto k = key_of("x");
    EXPECT_FALSE(cache.get(k).has_value());
    cache.put(k, results_for("x"));
    const auto got = cache.get(k);
    ASSERT_TRUE(got.has_value());
    EXPECT_EQ(*got, results_for("x"));
    EXPECT_TRUE(std::filesystem::exists(cache.entry_path(k)));
    const auto hex = k.hex();
    EXPECT_EQ(cache.entry_path(k), dir / "c" / hex.substr(0, 2) / hex.substr(2, 2) / (hex + ".json"));
}

TEST(QueryCache, LruEvictionCapacityTwo)
{
    ft::TempDir dir;
    QueryCache cache(dir.path(), 2);
    cache.put(key_of("a"), results_for("a"));
    cache.put(key_of("b"), results_for("b"));
    ASSERT_TRUE(cache.get(key_of("a")).has_value());
    cache.put(key_of("c"), results_for("c"));
    EXPECT_FALSE(cache.contains(key_of("b")));
    EXPECT_FALSE(std::filesystem::exists(cache.entry_path(key_of("b"))));
    EXPECT_EQ(cache.keys(), (std::vector<Digest128>{key_of("a"), key_of("c")}));
    EXPECT_EQ(cache.size(), 2u);
}

TEST(QueryCache, RandomTraceMatchesLruSimulation)
{
    ft::TempDir dir;
    QueryCache cache(dir.path(), 5);
    ft::LruSim sim(5);
    std::map<std::string, std::string> by_hex;
    std::mt19937_64 rng(12);
    for (int op = 0; op < 100; ++op) {
        const std::string name = "q" + std::to_string(rng() % 12);
        by_hex[key_of(name).hex()] = name;
        if (rng() % 2 == 0) {
            EXPECT_EQ(cache.get(key_of(name)).has_value(), sim.get(name)) << "op " << op;
        } else {
            cache.put(key_of(name), results_for(name));
            sim.put(name);
        }
        ASSERT_EQ(names(cache.keys(), by_hex), sim.keys()) << "op " << op;
    }
}

TEST(QueryCache, SurvivesRestart)
{
    ft::TempDir dir;
    {
        QueryCache cache(dir.path(), 3);
        cache.put(key_of("a"), results_for("a"));
        cache.put(key_of("b"), results_for("b"));
        (void)cache.get(key_of("a"));
    }
    QueryCache reopened(dir.path(), 3);
    EXPECT_EQ(reopened.keys(), (std::vector<Digest128>{key_of("b"), key_of("a")}));
    EXPECT_EQ(reopened.get(key_of("b")), results_for("b"));
}

TEST(QueryCache, SmallerCapacityOnReopenEvicts)
{
    ft::TempDir dir;
    {
        QueryCache cache(dir.path(), 4);
        for (const char *n : {"a", "b", "c", "d"}) {
            cache.put(key_of(n), results_for(n));
        }
    }
    QueryCache reopened(dir.path(), 2);
    EXPECT_EQ(reopened.keys(), (std::vector<Digest128>{key_of("c"), key_of("d")}));
}

TEST(QueryCache, CorruptEntryIsAMiss)
{
    ft::TempDir dir;
    QueryCache cache(dir.path());
    cache.put(key_of("a"), results_for("a"));
    auto bytes = ft::read_file(cache.entry_path(key_of("a")));
    bytes[bytes.size() / 2] ^= 0x20;
    ft::write_file(cache.entry_path(key_of("a")), bytes);
    EXPECT_FALSE(cache.get(key_of("a")).has_value());
    EXPECT_FALSE(cache.contains(key_of("a")));
    EXPECT_FALSE(std::filesystem::exists(cache.entry_path(key_of("a"))));

    cache.put(key_of("b"), results_for("b"));
    ft::write_file(cache.entry_path(key_of("b")), "{ not json");
    EXPECT_FALSE(cache.get(key_of("b")).has_value());
}

TEST(QueryCache, ReconcileDropsMissingAndAdoptsOrphans)
{
    ft::TempDir dir;
    {
        QueryCache cache(dir.path());
        for (const char *n : {"a", "b", "c"}) {
            cache.put(key_of(n), results_for(n));
        }
        std::filesystem::remove(cache.entry_path(key_of("b")));
        ft::write_file(dir / "manifest", key_of("a").hex() + "\n" + key_of("b").hex() + "\n");
        ft::write_file(dir / "manifest.tmp.99999", "partial");
    }
    QueryCache reopened(dir.path());
    const auto keys = reopened.keys();
    ASSERT_EQ(keys.size(), 2u);
    EXPECT_EQ(keys[0], key_of("a"));
    EXPECT_EQ(keys[1], key_of("c")); // orphan adopted as most recent
    EXPECT_FALSE(std::filesystem::exists(dir / "manifest.tmp.99999"));
    EXPECT_EQ(reopened.get(key_of("c")), results_for("c"));
}

TEST(QueryCache, LostManifestAdoptsEverything)
{
    ft::TempDir dir;
    {
        QueryCache cache(dir.path());
        for (const char *n : {"a", "b", "c"}) {
            cache.put(key_of(n), results_for(n));
        }
    }
    std::filesystem::remove(dir / "manifest");
    QueryCache reopened(dir.path());
    EXPECT_EQ(reopened.size(), 3u);
    EXPECT_TRUE(reopened.contains(key_of("b")));
}

TEST(QueryCache, ClearEmptiesTheDirectory)
{
    ft::TempDir dir;
    QueryCache cache(dir.path());
    cache.put(key_of("a"), results_for("a"));
    cache.clear();
    EXPECT_EQ(cache.size(), 0u);
    EXPECT_FALSE(std::filesystem::exists(cache.entry_path(key_of("a"))));
}

TEST(QueryCache, ConfigurationErrors)
{
    ft::TempDir dir;
    EXPECT_THROW((void)QueryCache(dir.path(), 0), InvalidArgument);
    ft::write_file(dir / "file", "x");
    EXPECT_THROW((void)QueryCache(dir / "file" / "sub"), IoError);
}

TEST(QueryCache, ConcurrentWritersShareADirectory)
{
    ft::TempDir dir;
    {
        std::vector<std::jthread> writers;
        for (int w = 0; w < 4; ++w) {
            writers.emplace_back([&, w] {
                QueryCache cache(dir.path());
                for (int i = 0; i < 20; ++i) {
                    const auto n = std::to_string(w) + "-" + std::to_string(i);
                    cache.put(key_of(n), results_for(n));
                }
            });
        }
    }
    QueryCache cache(dir.path());
    EXPECT_EQ(cache.size(), 80u);
}

TEST(CachedRetrieve, HitTouchesNoIndex)
{
    ft::TempDir dir;
    const auto config = ft::build_pipeline(dir / "p", ft::synthetic_corpus(50, 80, 4, 20, 1));
    Retriever r(config);
    QueryCache cache(dir / "cache");

    const auto [first, hit1] = cached_retrieve(cache, r, "w1 w2", 5);
    EXPECT_FALSE(hit1);
    const auto probes = r.index_probes();
    EXPECT_EQ(probes, 2u);
    const auto [second, hit2] = cached_retrieve(cache, r, "  w1   w2 ", 5);
    EXPECT_TRUE(hit2);
    EXPECT_EQ(second, first);
    EXPECT_EQ(r.index_probes(), probes);
    const auto [third, hit3] = cached_retrieve(cache, r, "w1 w2", 4);
    EXPECT_FALSE(hit3);
    EXPECT_EQ(third.size(), 4u);
}
