#include "flexkit/context.hpp"

#include "flexkit/errors.hpp"

namespace flexkit {

nlohmann::json to_json(const RetrievedContext &ctx)
{
    nlohmann::json j;
    j["doc_id"] = ctx.doc_id;
    j["rank"] = ctx.rank;
    j["fused_score"] = ctx.fused_score;
    j["per_index_scores"] = ctx.per_index_scores;
    j["sources"] = ctx.sources;
    j["text"] = ctx.text;
    return j;
}

RetrievedContext context_from_json(const nlohmann::json &j)
{
    try {
        RetrievedContext c;
        c.doc_id = j.at("doc_id").get<DocId>();
        c.rank = j.at("rank").get<std::size_t>();
        c.fused_score = j.at("fused_score").get<double>();
        c.per_index_scores = j.at("per_index_scores").get<std::map<std::string, double>>();
        c.sources = j.at("sources").get<std::set<std::string>>();
        c.text = j.value("text", std::string());
        return c;
    } catch (const nlohmann::json::exception &e) {
        throw FormatError(std::string("malformed retrieved context: ") + e.what());
    }
}

nlohmann::json to_json(const std::vector<RetrievedContext> &contexts)
{
    auto arr = nlohmann::json::array();
    for (const auto &c : contexts) {
        arr.push_back(to_json(c));
    }
    return arr;
}

std::vector<RetrievedContext> contexts_from_json(const nlohmann::json &j)
{
    if (!j.is_array()) {
        throw FormatError("retrieved contexts must be a JSON array");
    }
    std::vector<RetrievedContext> out;
    out.reserve(j.size());
    for (const auto &item : j) {
        out.push_back(context_from_json(item));
    }
    return out;
}

void assign_ranks(std::vector<RetrievedContext> &contexts) noexcept
{
    for (std::size_t i = 0; i < contexts.size(); ++i) {
        contexts[i].rank = i + 1;
    }
}

} // namespace flexkit
