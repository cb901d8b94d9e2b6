#include "flexkit/eval.hpp"

#include "flexkit/errors.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <unordered_map>

#include <unicode/locid.h>
#include <unicode/unistr.h>

namespace flexkit {

namespace {

bool is_ascii_punct(unsigned char c) noexcept
{
    return (c >= 33 && c <= 47) || (c >= 58 && c <= 64) || (c >= 91 && c <= 96) || (c >= 123 && c <= 126);
}

bool is_word_char(unsigned char c) noexcept { return std::isalnum(c) || c == '_' || c >= 0x80; }

bool is_space(unsigned char c) noexcept { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

std::vector<std::string_view> split_ws(std::string_view s)
{
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && is_space(static_cast<unsigned char>(s[i]))) {
            ++i;
        }
        const std::size_t start = i;
        while (i < s.size() && !is_space(static_cast<unsigned char>(s[i]))) {
            ++i;
        }
        if (i > start) {
            out.push_back(s.substr(start, i - start));
        }
    }
    return out;
}

void require_golds(std::span<const std::string> golds)
{
    if (golds.empty()) {
        throw InvalidArgument("gold answer list must not be empty");
    }
}

double f1_normalized(std::string_view pred, std::string_view gold)
{
    const auto p = split_ws(pred);
    const auto g = split_ws(gold);
    if (p.empty() || g.empty()) {
        return p.empty() && g.empty() ? 1.0 : 0.0;
    }
    std::unordered_map<std::string_view, std::size_t> counts;
    for (auto t : g) {
        ++counts[t];
    }
    std::size_t same = 0;
    for (auto t : p) {
        auto it = counts.find(t);
        if (it != counts.end() && it->second > 0) {
            --it->second;
            ++same;
        }
    }
    if (same == 0) {
        return 0.0;
    }
    const double precision = static_cast<double>(same) / static_cast<double>(p.size());
    const double recall = static_cast<double>(same) / static_cast<double>(g.size());
    return 2.0 * precision * recall / (precision + recall);
}

std::vector<std::string> normalized_golds(std::span<const std::string> golds)
{
    std::set<std::string> distinct;
    for (const auto &g : golds) {
        auto n = normalize_answer(g);
        if (!n.empty()) {
            distinct.insert(std::move(n));
        }
    }
    return {distinct.begin(), distinct.end()};
}

std::string id_of(const nlohmann::json &j)
{
    const auto &id = j.at("id");
    if (id.is_string()) {
        return id.get<std::string>();
    }
    if (id.is_number_integer()) {
        return std::to_string(id.get<long long>());
    }
    throw FormatError("id must be a string or integer");
}

std::vector<std::string> texts_of(const std::vector<RetrievedContext> &contexts)
{
    std::vector<std::string> out;
    out.reserve(contexts.size());
    for (const auto &c : contexts) {
        out.push_back(c.text);
    }
    return out;
}

void score_retrieval(ExampleScores &s, const std::vector<std::string> &texts, std::span<const std::string> golds,
                     std::size_t k)
{
    const auto norm_golds = normalized_golds(golds);
    const std::size_t depth = std::min(k, texts.size());
    std::vector<std::string> norm_texts;
    norm_texts.reserve(depth);
    for (std::size_t i = 0; i < depth; ++i) {
        norm_texts.push_back(normalize_answer(texts[i]));
    }
    std::size_t found = 0;
    for (const auto &g : norm_golds) {
        found += std::any_of(norm_texts.begin(), norm_texts.end(),
                             [&](const std::string &t) { return t.find(g) != std::string::npos; });
    }
    for (std::size_t i = 0; i < depth && !s.hit_rank; ++i) {
        for (const auto &g : norm_golds) {
            if (norm_texts[i].find(g) != std::string::npos) {
                s.hit_rank = i + 1;
                break;
            }
        }
    }
    s.succ = s.hit_rank ? 1 : 0;
    s.recall = norm_golds.empty() ? 0.0 : static_cast<double>(found) / static_cast<double>(norm_golds.size());
}

void check_dataset(std::span<const QaExample> dataset)
{
    if (dataset.empty()) {
        throw InvalidArgument("dataset is empty");
    }
}

std::string format_fixed(double v, int digits)
{
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(digits) << v;
    return ss.str();
}

} // namespace

std::string normalize_answer(std::string_view s)
{
    std::string lowered;
    icu::UnicodeString::fromUTF8(icu::StringPiece(s.data(), static_cast<std::int32_t>(s.size())))
        .toLower(icu::Locale::getRoot())
        .toUTF8String(lowered);
    std::string text;
    text.reserve(lowered.size());
    for (unsigned char c : lowered) {
        if (!is_ascii_punct(c)) {
            text.push_back(static_cast<char>(c));
        }
    }
    // Blank out whole-word articles, where word boundaries follow \b semantics.
    for (std::size_t i = 0; i < text.size();) {
        const bool at_start = i == 0 || !is_word_char(static_cast<unsigned char>(text[i - 1]));
        if (!at_start || !is_word_char(static_cast<unsigned char>(text[i]))) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < text.size() && is_word_char(static_cast<unsigned char>(text[j]))) {
            ++j;
        }
        const std::string_view word(text.data() + i, j - i);
        if (word == "a" || word == "an" || word == "the") {
            std::fill(text.begin() + static_cast<std::ptrdiff_t>(i), text.begin() + static_cast<std::ptrdiff_t>(j), ' ');
        }
        i = j;
    }
    std::string out;
    for (auto w : split_ws(text)) {
        if (!out.empty()) {
            out += ' ';
        }
        out += w;
    }
    return out;
}

int exact_match(std::string_view prediction, std::span<const std::string> golds)
{
    require_golds(golds);
    const auto p = normalize_answer(prediction);
    return std::any_of(golds.begin(), golds.end(), [&](const std::string &g) { return normalize_answer(g) == p; })
               ? 1
               : 0;
}

double token_f1(std::string_view prediction, std::span<const std::string> golds)
{
    require_golds(golds);
    const auto p = normalize_answer(prediction);
    double best = 0.0;
    for (const auto &g : golds) {
        best = std::max(best, f1_normalized(p, normalize_answer(g)));
    }
    return best;
}

int success_rate(std::span<const std::string> context_texts, std::span<const std::string> golds, std::size_t k)
{
    if (k < 1) {
        throw InvalidArgument("success_rate k must be >= 1");
    }
    const auto norm_golds = normalized_golds(golds);
    const std::size_t depth = std::min(k, context_texts.size());
    for (std::size_t i = 0; i < depth; ++i) {
        const auto text = normalize_answer(context_texts[i]);
        for (const auto &g : norm_golds) {
            if (text.find(g) != std::string::npos) {
                return 1;
            }
        }
    }
    return 0;
}

int success_rate(std::span<const RetrievedContext> contexts, std::span<const std::string> golds, std::size_t k)
{
    std::vector<std::string> texts;
    for (std::size_t i = 0; i < std::min(k, contexts.size()); ++i) {
        texts.push_back(contexts[i].text);
    }
    return success_rate(texts, golds, k);
}

// ---------------------------------------------------------------------------
// datasets

std::vector<QaExample> parse_dataset(std::istream &in)
{
    std::vector<QaExample> out;
    std::set<std::string> ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        try {
            const auto j = nlohmann::json::parse(line);
            QaExample ex;
            ex.id = id_of(j);
            ex.question = j.at("question").get<std::string>();
            ex.answers = j.at("answers").get<std::vector<std::string>>();
            if (ex.answers.empty()) {
                throw FormatError("answers must not be empty");
            }
            if (!ids.insert(ex.id).second) {
                throw FormatError("duplicate id '" + ex.id + "'");
            }
            out.push_back(std::move(ex));
        } catch (const nlohmann::json::exception &e) {
            throw FormatError("dataset line " + std::to_string(line_no) + ": " + e.what());
        } catch (const FormatError &e) {
            throw FormatError("dataset line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

std::vector<QaExample> load_dataset(const std::filesystem::path &path)
{
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open dataset " + path.string());
    }
    return parse_dataset(in);
}

std::map<std::string, std::string> load_predictions(const std::filesystem::path &path)
{
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open predictions " + path.string());
    }
    std::map<std::string, std::string> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        try {
            const auto j = nlohmann::json::parse(line);
            out[id_of(j)] = j.at("prediction").get<std::string>();
        } catch (const std::exception &e) {
            throw FormatError("predictions line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// reports

void compute_aggregates(EvalReport &report)
{
    report.aggregates.clear();
    double f1 = 0, em = 0, succ = 0, recall = 0, rr = 0;
    std::size_t n_gen = 0, n_ret = 0;
    for (const auto &e : report.examples) {
        if (e.f1) {
            f1 += *e.f1;
            em += *e.em;
            ++n_gen;
        }
        if (e.succ) {
            succ += *e.succ;
            recall += e.recall.value_or(0.0);
            rr += e.hit_rank ? 1.0 / static_cast<double>(*e.hit_rank) : 0.0;
            ++n_ret;
        }
    }
    if (n_gen > 0) {
        report.aggregates["f1"] = 100.0 * f1 / static_cast<double>(n_gen);
        report.aggregates["em"] = 100.0 * em / static_cast<double>(n_gen);
    }
    if (n_ret > 0) {
        report.aggregates["succ"] = 100.0 * succ / static_cast<double>(n_ret);
        report.aggregates["recall"] = 100.0 * recall / static_cast<double>(n_ret);
        report.aggregates["mrr"] = 100.0 * rr / static_cast<double>(n_ret);
    }
}

nlohmann::json EvalReport::to_json(bool include_timing) const
{
    nlohmann::json j;
    j["kind"] = kind;
    j["k"] = k;
    j["fingerprint"] = fingerprint;
    j["count"] = examples.size();
    j["aggregates"] = aggregates;
    auto rows = nlohmann::json::array();
    for (const auto &e : examples) {
        nlohmann::json r;
        r["id"] = e.id;
        if (e.prediction) {
            r["prediction"] = *e.prediction;
        }
        if (e.f1) {
            r["f1"] = *e.f1;
            r["em"] = *e.em;
        }
        if (e.succ) {
            r["succ"] = *e.succ;
            r["recall"] = *e.recall;
            r["hit_rank"] = e.hit_rank ? nlohmann::json(*e.hit_rank) : nlohmann::json(nullptr);
        }
        rows.push_back(std::move(r));
    }
    j["examples"] = std::move(rows);
    if (include_timing && elapsed_ms) {
        j["elapsed_ms"] = *elapsed_ms;
    }
    return j;
}

EvalReport EvalReport::from_json(const nlohmann::json &j)
{
    EvalReport r;
    try {
        r.kind = j.at("kind").get<std::string>();
        r.k = j.at("k").get<std::size_t>();
        r.fingerprint = j.at("fingerprint").get<std::string>();
        r.aggregates = j.at("aggregates").get<std::map<std::string, double>>();
        for (const auto &row : j.at("examples")) {
            ExampleScores e;
            e.id = row.at("id").get<std::string>();
            if (row.contains("prediction")) {
                e.prediction = row.at("prediction").get<std::string>();
            }
            if (row.contains("f1")) {
                e.f1 = row.at("f1").get<double>();
                e.em = row.at("em").get<int>();
            }
            if (row.contains("succ")) {
                e.succ = row.at("succ").get<int>();
                e.recall = row.at("recall").get<double>();
                if (!row.at("hit_rank").is_null()) {
                    e.hit_rank = row.at("hit_rank").get<std::size_t>();
                }
            }
            r.examples.push_back(std::move(e));
        }
        if (j.contains("elapsed_ms")) {
            r.elapsed_ms = j.at("elapsed_ms").get<double>();
        }
    } catch (const nlohmann::json::exception &e) {
        throw FormatError(std::string("malformed eval report: ") + e.what());
    }
    return r;
}

std::string EvalReport::table() const
{
    std::ostringstream out;
    out << kind << " evaluation, " << examples.size() << " examples";
    if (k > 0) {
        out << ", k=" << k;
    }
    out << "\n";
    static constexpr std::pair<const char *, const char *> kRows[] = {
        {"f1", "F1"}, {"em", "EM"}, {"succ", "Succ"}, {"recall", "Recall@k"}, {"mrr", "MRR"}};
    for (const auto &[key, label] : kRows) {
        const auto it = aggregates.find(key);
        if (it != aggregates.end()) {
            out << "  " << std::left << std::setw(10) << label << std::right << std::setw(8)
                << format_fixed(it->second, 2) << "\n";
        }
    }
    return out.str();
}

EvalReport evaluate_retrieval(const Retriever &retriever, std::span<const QaExample> dataset, std::size_t k,
                              const BatchOptions &batch)
{
    check_dataset(dataset);
    const auto start = std::chrono::steady_clock::now();
    std::vector<std::string> questions;
    for (const auto &ex : dataset) {
        questions.push_back(ex.question);
    }
    const auto results = retriever.retrieve_batch(questions, k, batch);

    EvalReport report;
    report.kind = "retrieval";
    report.k = k;
    report.fingerprint = retriever.fingerprint().hex();
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        ExampleScores s;
        s.id = dataset[i].id;
        score_retrieval(s, texts_of(results[i]), dataset[i].answers, k);
        report.examples.push_back(std::move(s));
    }
    compute_aggregates(report);
    report.elapsed_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return report;
}

EvalReport evaluate_generation(const std::map<std::string, std::string> &predictions,
                               std::span<const QaExample> dataset)
{
    check_dataset(dataset);
    EvalReport report;
    report.kind = "generation";
    for (const auto &ex : dataset) {
        const auto it = predictions.find(ex.id);
        if (it == predictions.end()) {
            throw InvalidArgument("no prediction for example id '" + ex.id + "'");
        }
        ExampleScores s;
        s.id = ex.id;
        s.prediction = it->second;
        s.f1 = token_f1(it->second, ex.answers);
        s.em = exact_match(it->second, ex.answers);
        report.examples.push_back(std::move(s));
    }
    compute_aggregates(report);
    return report;
}

EvalReport evaluate_rag(const Retriever &retriever, std::span<const QaExample> dataset, std::size_t k,
                        const RefineConfig &refine_config, const Generator &generate, const BatchOptions &batch)
{
    check_dataset(dataset);
    const auto start = std::chrono::steady_clock::now();
    std::vector<std::string> questions;
    for (const auto &ex : dataset) {
        questions.push_back(ex.question);
    }
    const auto results = retriever.retrieve_batch(questions, k, batch);

    EvalReport report;
    report.kind = "rag";
    report.k = k;
    report.fingerprint = retriever.fingerprint().hex();
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        ExampleScores s;
        s.id = dataset[i].id;
        score_retrieval(s, texts_of(results[i]), dataset[i].answers, k);
        const auto refined = refine(results[i], refine_config);
        s.prediction = generate(dataset[i], refined);
        s.f1 = token_f1(*s.prediction, dataset[i].answers);
        s.em = exact_match(*s.prediction, dataset[i].answers);
        report.examples.push_back(std::move(s));
    }
    compute_aggregates(report);
    report.elapsed_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return report;
}

} // namespace flexkit
