#include "flexkit/retriever_config.hpp"

#include "flexkit/errors.hpp"

#include <set>

namespace flexkit {

IndexType parse_index_type(std::string_view name)
{
    if (name == "bm25") {
        return IndexType::bm25;
    }
    if (name == "flat") {
        return IndexType::flat;
    }
    if (name == "ivfpq") {
        return IndexType::ivfpq;
    }
    if (name == "remote") {
        return IndexType::remote;
    }
    throw InvalidArgument("unknown index type '" + std::string(name) + "'");
}

std::string_view to_string(IndexType type) noexcept
{
    switch (type) {
    case IndexType::bm25:
        return "bm25";
    case IndexType::flat:
        return "flat";
    case IndexType::ivfpq:
        return "ivfpq";
    case IndexType::remote:
        return "remote";
    }
    return "bm25";
}

bool is_dense(IndexType type) noexcept { return type == IndexType::flat || type == IndexType::ivfpq; }

Fusion parse_fusion(std::string_view name)
{
    if (name == "rrf") {
        return Fusion::rrf;
    }
    if (name == "weighted_sum") {
        return Fusion::weighted_sum;
    }
    throw InvalidArgument("unknown fusion '" + std::string(name) + "'");
}

std::string_view to_string(Fusion fusion) noexcept { return fusion == Fusion::rrf ? "rrf" : "weighted_sum"; }

void RetrieverConfig::validate() const
{
    std::vector<std::string> problems;
    if (indexes.empty()) {
        problems.emplace_back("at least one index is required");
    }
    std::set<std::string> names;
    bool any_dense = false;
    for (const auto &ix : indexes) {
        if (ix.name.empty()) {
            problems.emplace_back("index name must be non-empty");
        } else if (!names.insert(ix.name).second) {
            problems.push_back("duplicate index name '" + ix.name + "'");
        }
        if (ix.type == IndexType::remote ? ix.endpoint.empty() : ix.path.empty()) {
            problems.push_back("index '" + ix.name + "' needs a " + (ix.type == IndexType::remote ? "endpoint" : "path"));
        }
        if (ix.nprobe && *ix.nprobe == 0) {
            problems.push_back("index '" + ix.name + "' nprobe must be >= 1");
        }
        any_dense = any_dense || is_dense(ix.type);
    }
    if (!weights.empty()) {
        if (weights.size() != indexes.size()) {
            problems.push_back("weights count (" + std::to_string(weights.size()) + ") must equal index count (" +
                               std::to_string(indexes.size()) + ")");
        }
        for (double w : weights) {
            if (!(w > 0.0)) {
                problems.emplace_back("weights must be > 0");
                break;
            }
        }
    }
    if (rrf_c < 0) {
        problems.emplace_back("rrf_c must be >= 0");
    }
    if (retrieve_k < 1 || final_k < 1) {
        problems.emplace_back("retrieve_k and final_k must be >= 1");
    }
    if (final_k > retrieve_k) {
        problems.emplace_back("final_k must not exceed retrieve_k");
    }
    if (!reranker.empty() && reranker != "lexical") {
        problems.push_back("unknown reranker '" + reranker + "'");
    }
    if (!reranker.empty() && store.empty()) {
        problems.emplace_back("a reranker needs a store to read document text from");
    }
    if (any_dense && !encoder) {
        problems.emplace_back("dense indexes require an encoder spec");
    }
    if (!problems.empty()) {
        std::string msg = "invalid retriever config:";
        for (const auto &p : problems) {
            msg += "\n  - " + p;
        }
        throw InvalidArgument(msg);
    }
}

double RetrieverConfig::weight(std::size_t index) const { return weights.empty() ? 1.0 : weights.at(index); }

nlohmann::json RetrieverConfig::to_json(bool with_paths) const
{
    nlohmann::json j;
    auto arr = nlohmann::json::array();
    for (const auto &ix : indexes) {
        nlohmann::json e;
        e["name"] = ix.name;
        e["field"] = ix.field;
        e["type"] = to_string(ix.type);
        if (with_paths && !ix.path.empty()) {
            e["path"] = ix.path.string();
        }
        if (!ix.endpoint.empty()) {
            e["endpoint"] = ix.endpoint;
        }
        if (ix.nprobe) {
            e["nprobe"] = *ix.nprobe;
        }
        arr.push_back(std::move(e));
    }
    j["indexes"] = std::move(arr);
    if (with_paths && !store.empty()) {
        j["store"] = store.string();
    }
    j["fusion"] = to_string(fusion);
    j["weights"] = weights;
    j["rrf_c"] = rrf_c;
    j["retrieve_k"] = retrieve_k;
    j["final_k"] = final_k;
    j["reranker"] = reranker.empty() ? nlohmann::json(nullptr) : nlohmann::json(reranker);
    j["encoder"] = encoder ? encoder->to_json() : nlohmann::json(nullptr);
    j["refine"] = refine.to_json();
    return j;
}

RetrieverConfig RetrieverConfig::from_json(const nlohmann::json &j, const std::filesystem::path &base_dir)
{
    auto c = parse_json(j, base_dir);
    c.validate();
    return c;
}

RetrieverConfig RetrieverConfig::parse_json(const nlohmann::json &j, const std::filesystem::path &base_dir)
{
    if (!j.is_object()) {
        throw InvalidArgument("retriever config must be a JSON object");
    }
    RetrieverConfig c;
    try {
        for (const auto &e : j.at("indexes")) {
            IndexRef ix;
            ix.name = e.at("name").get<std::string>();
            ix.field = e.value("field", std::string("text"));
            ix.type = parse_index_type(e.value("type", std::string("bm25")));
            if (e.contains("path")) {
                std::filesystem::path p = e.at("path").get<std::string>();
                ix.path = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
            }
            ix.endpoint = e.value("endpoint", std::string());
            if (e.contains("nprobe") && !e.at("nprobe").is_null()) {
                ix.nprobe = e.at("nprobe").get<std::size_t>();
            }
            c.indexes.push_back(std::move(ix));
        }
        if (j.contains("store") && !j.at("store").is_null()) {
            std::filesystem::path p = j.at("store").get<std::string>();
            c.store = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
        }
        c.fusion = parse_fusion(j.value("fusion", std::string("rrf")));
        if (j.contains("weights") && !j.at("weights").is_null()) {
            c.weights = j.at("weights").get<std::vector<double>>();
        }
        c.rrf_c = j.value("rrf_c", c.rrf_c);
        c.retrieve_k = j.value("retrieve_k", c.retrieve_k);
        c.final_k = j.value("final_k", c.final_k);
        if (j.contains("reranker") && !j.at("reranker").is_null()) {
            c.reranker = j.at("reranker").get<std::string>();
        }
        if (j.contains("encoder") && !j.at("encoder").is_null()) {
            c.encoder = EncoderSpec::from_json(j.at("encoder"));
        }
        if (j.contains("refine")) {
            c.refine = RefineConfig::from_json(j.at("refine"));
        }
    } catch (const nlohmann::json::exception &e) {
        throw InvalidArgument(std::string("malformed retriever config: ") + e.what());
    }
    return c;
}

} // namespace flexkit
