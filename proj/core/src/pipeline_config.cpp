#include "flexkit/pipeline_config.hpp"

#include "flexkit/errors.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>

namespace flexkit {

namespace {

void interpolate_all(nlohmann::json &j, std::vector<std::string> &missing)
{
    if (j.is_string()) {
        j = interpolate_env(j.get_ref<const std::string &>(), missing);
    } else if (j.is_structured()) {
        for (auto &child : j) {
            interpolate_all(child, missing);
        }
    }
}

constexpr std::string_view kLogLevels[] = {"trace", "debug", "info", "warn", "error", "critical", "off"};

} // namespace

std::string interpolate_env(std::string_view text, std::vector<std::string> &missing)
{
    std::string out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const auto open = text.find("${", pos);
        if (open == std::string_view::npos) {
            break;
        }
        const auto close = text.find('}', open + 2);
        if (close == std::string_view::npos) {
            break;
        }
        out.append(text.substr(pos, open - pos));
        const std::string name(text.substr(open + 2, close - open - 2));
        if (const char *value = std::getenv(name.c_str())) {
            out += value;
        } else {
            missing.push_back(name);
        }
        pos = close + 1;
    }
    out.append(text.substr(pos));
    return out;
}

std::filesystem::path default_cache_dir()
{
    if (const char *dir = std::getenv("FLEXKIT_CACHE_DIR"); dir != nullptr && *dir != '\0') {
        return dir;
    }
    if (const char *xdg = std::getenv("XDG_CACHE_HOME"); xdg != nullptr && *xdg != '\0') {
        return std::filesystem::path(xdg) / "flexkit";
    }
    if (const char *home = std::getenv("HOME"); home != nullptr && *home != '\0') {
        return std::filesystem::path(home) / ".cache" / "flexkit";
    }
    return std::filesystem::temp_directory_path() / "flexkit-cache";
}

PipelineConfig parse_pipeline_config(const nlohmann::json &doc, const std::filesystem::path &base_dir)
{
    if (!doc.is_object()) {
        throw InvalidArgument("pipeline config must be a JSON object");
    }
    nlohmann::json j = doc;
    std::vector<std::string> problems;
    std::vector<std::string> missing_vars;
    interpolate_all(j, missing_vars);
    for (const auto &name : missing_vars) {
        problems.push_back("environment variable ${" + name + "} is not set");
    }

    PipelineConfig cfg;
    try {
        cfg.retriever = RetrieverConfig::parse_json(j, base_dir);
        for (const auto &ix : cfg.retriever.indexes) {
            if (ix.type != IndexType::remote && !std::filesystem::exists(ix.path)) {
                problems.push_back("index '" + ix.name + "': file not found: " + ix.path.string());
            }
        }
        if (!cfg.retriever.store.empty() && !std::filesystem::exists(cfg.retriever.store)) {
            problems.push_back("store not found: " + cfg.retriever.store.string());
        }
        cfg.retriever.validate();
    } catch (const Error &e) {
        problems.emplace_back(e.what());
    }

    try {
        cfg.cache.dir = default_cache_dir();
        if (j.contains("cache") && !j.at("cache").is_null()) {
            const auto &c = j.at("cache");
            cfg.cache.enabled = c.value("enabled", cfg.cache.enabled);
            cfg.cache.capacity = c.value("capacity", cfg.cache.capacity);
            if (c.contains("dir") && !c.at("dir").is_null()) {
                std::filesystem::path p = c.at("dir").get<std::string>();
                cfg.cache.dir = p.is_relative() ? base_dir / p : p;
            }
            if (cfg.cache.capacity == 0) {
                problems.emplace_back("cache.capacity must be >= 1");
            }
        }
        cfg.log_level = j.value("log_level", cfg.log_level);
        if (std::find(std::begin(kLogLevels), std::end(kLogLevels), cfg.log_level) == std::end(kLogLevels)) {
            problems.push_back("unknown log_level '" + cfg.log_level + "'");
        }
    } catch (const nlohmann::json::exception &e) {
        problems.push_back(std::string("malformed cache or log settings: ") + e.what());
    }

    if (!problems.empty()) {
        std::string msg = "invalid pipeline config:";
        for (const auto &p : problems) {
            msg += "\n  - " + p;
        }
        throw InvalidArgument(msg);
    }
    return cfg;
}

PipelineConfig load_pipeline_config(const std::filesystem::path &path)
{
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open config " + path.string());
    }
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception &e) {
        throw InvalidArgument("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return parse_pipeline_config(doc, path.parent_path());
}

} // namespace flexkit
