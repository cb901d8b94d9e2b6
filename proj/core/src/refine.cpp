#include "flexkit/refine.hpp"

#include "flexkit/errors.hpp"
#include "flexkit/tokenizer.hpp"

#include <algorithm>

namespace flexkit {

RepackStrategy parse_repack_strategy(std::string_view name)
{
    if (name == "as_is") {
        return RepackStrategy::as_is;
    }
    if (name == "reverse") {
        return RepackStrategy::reverse;
    }
    if (name == "sandwich") {
        return RepackStrategy::sandwich;
    }
    throw InvalidArgument("unknown repack strategy '" + std::string(name) + "'");
}

std::string_view to_string(RepackStrategy strategy) noexcept
{
    switch (strategy) {
    case RepackStrategy::as_is:
        return "as_is";
    case RepackStrategy::reverse:
        return "reverse";
    case RepackStrategy::sandwich:
        return "sandwich";
    }
    return "as_is";
}

std::vector<RetrievedContext> repack(std::vector<RetrievedContext> contexts, RepackStrategy strategy)
{
    switch (strategy) {
    case RepackStrategy::as_is:
        return contexts;
    case RepackStrategy::reverse:
        std::reverse(contexts.begin(), contexts.end());
        return contexts;
    case RepackStrategy::sandwich: {
        std::vector<RetrievedContext> out;
        out.reserve(contexts.size());
        for (std::size_t i = 0; i < contexts.size(); i += 2) {
            out.push_back(std::move(contexts[i]));
        }
        // ranks 2, 4, ... (odd 0-based positions), deepest first
        const std::size_t odd_count = contexts.size() / 2;
        for (std::size_t j = odd_count; j > 0; --j) {
            out.push_back(std::move(contexts[2 * j - 1]));
        }
        return out;
    }
    }
    return contexts;
}

std::vector<RetrievedContext> squeeze(std::vector<RetrievedContext> contexts, std::size_t token_budget)
{
    std::vector<RetrievedContext> out;
    std::size_t used = 0;
    for (auto &ctx : contexts) {
        const auto spans = tokenize_spans(ctx.text);
        if (used + spans.size() <= token_budget) {
            used += spans.size();
            out.push_back(std::move(ctx));
            continue;
        }
        const std::size_t remaining = token_budget - used;
        if (remaining > 0) {
            ctx.text = ctx.text.substr(0, spans[remaining - 1].end);
            out.push_back(std::move(ctx));
        }
        break;
    }
    return out;
}

nlohmann::json RefineConfig::to_json() const
{
    nlohmann::json j;
    j["strategy"] = flexkit::to_string(strategy);
    j["token_budget"] = token_budget ? nlohmann::json(*token_budget) : nlohmann::json(nullptr);
    return j;
}

RefineConfig RefineConfig::from_json(const nlohmann::json &j)
{
    RefineConfig c;
    if (j.is_null()) {
        return c;
    }
    if (!j.is_object()) {
        throw InvalidArgument("refine block must be a JSON object");
    }
    if (j.contains("strategy")) {
        c.strategy = parse_repack_strategy(j.at("strategy").get<std::string>());
    }
    if (j.contains("token_budget") && !j.at("token_budget").is_null()) {
        const auto budget = j.at("token_budget").get<long long>();
        if (budget < 0) {
            throw InvalidArgument("token_budget must be >= 0");
        }
        c.token_budget = static_cast<std::size_t>(budget);
    }
    return c;
}

std::vector<RetrievedContext> refine(std::vector<RetrievedContext> contexts, const RefineConfig &config)
{
    if (config.token_budget) {
        contexts = squeeze(std::move(contexts), *config.token_budget);
    }
    return repack(std::move(contexts), config.strategy);
}

} // namespace flexkit
