#include <gtest/gtest.h>

#include <cstdlib>

#include <json.hpp>

#include "flexkit/errors.hpp"
#include "flexkit/pipeline_config.hpp"
#include "test_support.hpp"

using namespace flexkit;
namespace ft = flexkit::testing;

namespace {

class EnvGuard {
public:
    EnvGuard(const char *name, const char *value) : name_(name)
    {
        if (const char *old = std::getenv(name)) {
            old_ = old;
        }
        if (value != nullptr) {
            ::setenv(name, value, 1);
        } else {
            ::unsetenv(name);
        }
    }
    ~EnvGuard()
    {
        if (old_) {
            ::setenv(name_.c_str(), old_->c_str(), 1);
        } else {
            ::unsetenv(name_.c_str());
        }
    }

private:
    std::string name_;
    std::optional<std::string> old_;
};

} // namespace

TEST(InterpolateEnv, ReplacesAndReportsMissing)
{
    EnvGuard a("FLEXKIT_T_A", "alpha");
    EnvGuard b("FLEXKIT_T_B", nullptr);
    std::vector<std::string> missing;
    EXPECT_EQ(interpolate_env("x/${FLEXKIT_T_A}/${FLEXKIT_T_B}/y", missing), "x/alpha//y");
    EXPECT_EQ(missing, (std::vector<std::string>{"FLEXKIT_T_B"}));
    EXPECT_EQ(interpolate_env("no vars ${unterminated", missing), "no vars ${unterminated");
}

TEST(DefaultCacheDir, Precedence)
{
    EnvGuard home("HOME", "/home/u");
    {
        EnvGuard fx("FLEXKIT_CACHE_DIR", "/explicit");
        EnvGuard xdg("XDG_CACHE_HOME", "/xdg");
        EXPECT_EQ(default_cache_dir(), std::filesystem::path("/explicit"));
    }
    {
        EnvGuard fx("FLEXKIT_CACHE_DIR", nullptr);
        EnvGuard xdg("XDG_CACHE_HOME", "/xdg");
        EXPECT_EQ(default_cache_dir(), std::filesystem::path("/xdg/flexkit"));
    }
    EnvGuard fx("FLEXKIT_CACHE_DIR", nullptr);
    EnvGuard xdg("XDG_CACHE_HOME", nullptr);
    EXPECT_EQ(default_cache_dir(), std::filesystem::path("/home/u/.cache/flexkit"));
}

TEST(PipelineConfig, LoadsWithInterpolationAndRelativePaths)
{
    ft::TempDir dir;
    (void)ft::build_pipeline(dir / "data", {"one doc", "two docs"});
    EnvGuard v("FLEXKIT_T_DATA", "data");
    ft::write_file(dir / "cfg.json", R"({
        "indexes": [{"name": "bm25", "type": "bm25", "path": "${FLEXKIT_T_DATA}/bm25.fsi"}],
        "store": "${FLEXKIT_T_DATA}/store.fcs",
        "retrieve_k": 5, "final_k": 2,
        "cache": {"dir": "cache", "capacity": 7},
        "log_level": "info"})");
    const auto cfg = load_pipeline_config(dir / "cfg.json");
    EXPECT_EQ(cfg.retriever.indexes[0].path, dir / "data" / "bm25.fsi");
    EXPECT_EQ(cfg.retriever.store, dir / "data" / "store.fcs");
    EXPECT_EQ(cfg.cache.dir, dir / "cache");
    EXPECT_EQ(cfg.cache.capacity, 7u);
    EXPECT_TRUE(cfg.cache.enabled);
    EXPECT_EQ(cfg.log_level, "info");
}

TEST(PipelineConfig, ReportsEveryProblemAtOnce)
{
    ft::TempDir dir;
    EnvGuard v("FLEXKIT_T_UNSET", nullptr);
    const auto doc = nlohmann::json::parse(R"({
        "indexes": [{"name": "d", "type": "flat", "path": "${FLEXKIT_T_UNSET}/nope.fdi"}],
        "store": "missing.fcs",
        "final_k": 50, "retrieve_k": 10,
        "cache": {"capacity": 0},
        "log_level": "chatty"})");
    try {
        (void)parse_pipeline_config(doc, dir.path());
        FAIL();
    } catch (const InvalidArgument &e) {
        const std::string msg = e.what();
        for (const char *needle : {"FLEXKIT_T_UNSET", "nope.fdi", "missing.fcs", "final_k", "encoder", "capacity",
                                   "chatty"}) {
            EXPECT_NE(msg.find(needle), std::string::npos) << needle << "\n" << msg;
        }
    }
}

TEST(PipelineConfig, FileErrors)
{
    ft::TempDir dir;
    EXPECT_THROW((void)load_pipeline_config(dir / "absent.json"), IoError);
    ft::write_file(dir / "bad.json", "{ nope");
    EXPECT_THROW((void)load_pipeline_config(dir / "bad.json"), InvalidArgument);
    EXPECT_THROW((void)parse_pipeline_config(nlohmann::json::array(), dir.path()), InvalidArgument);
}
