#pragma once

// Reference implementations kept deliberately naive: straight from the formulas, no shared code
// with the library beyond the tokenizer.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iterator>
#include <list>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unicode/uchar.h>
#include <unicode/utf8.h>

namespace flexkit::testing {

struct OracleHit {
    std::size_t doc = 0;
    double score = 0.0;
};

/// Okapi BM25 with Lucene idf, scanning every document for every query term.
inline std::vector<OracleHit> naive_bm25(const std::vector<std::vector<std::string>> &docs,
                                         const std::vector<std::string> &query, std::size_t k, double k1 = 1.5,
                                         double b = 0.75)
{
    const double n = static_cast<double>(docs.size());
    double total = 0.0;
    for (const auto &d : docs) {
        total += static_cast<double>(d.size());
    }
    const double avgdl = docs.empty() ? 0.0 : total / n;
    const std::set<std::string> terms(query.begin(), query.end());
    std::map<std::string, double> df;
    for (const auto &t : terms) {
        for (const auto &d : docs) {
            if (std::find(d.begin(), d.end(), t) != d.end()) {
                df[t] += 1.0;
            }
        }
    }

    std::vector<OracleHit> hits;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        double score = 0.0;
        bool matched = false;
        for (const auto &t : terms) {
            const double tf = static_cast<double>(std::count(docs[i].begin(), docs[i].end(), t));
            if (tf == 0.0) {
                continue;
            }
            matched = true;
            const double idf = std::log(1.0 + (n - df[t] + 0.5) / (df[t] + 0.5));
            const double dl = static_cast<double>(docs[i].size());
            score += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * dl / avgdl));
        }
        if (matched) {
            hits.push_back({i, score});
        }
    }
    std::sort(hits.begin(), hits.end(), [](const OracleHit &x, const OracleHit &y) {
        return x.score != y.score ? x.score > y.score : x.doc < y.doc;
    });
    if (hits.size() > k) {
        hits.resize(k);
    }
    return hits;
}

/// Exhaustive inner-product (or negative squared L2) top-k over row-major vectors.
inline std::vector<OracleHit> brute_force_knn(const std::vector<float> &data, std::size_t dim, const float *query,
                                              std::size_t k, bool l2 = false)
{
    const std::size_t n = data.size() / dim;
    std::vector<OracleHit> hits(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < dim; ++j) {
            const double a = data[i * dim + j];
            const double q = query[j];
            s += l2 ? -(a - q) * (a - q) : a * q;
        }
        hits[i] = {i, s};
    }
    std::sort(hits.begin(), hits.end(), [](const OracleHit &x, const OracleHit &y) {
        return x.score != y.score ? x.score > y.score : x.doc < y.doc;
    });
    hits.resize(std::min(k, n));
    return hits;
}

/// Token-overlap F1 with the multiset intersection taken over sorted copies.
inline double overlap_f1_ref(std::vector<std::string> a, std::vector<std::string> b)
{
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::vector<std::string> common;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
    if (common.empty()) {
        return 0.0;
    }
    const double p = static_cast<double>(common.size()) / static_cast<double>(b.size());
    const double r = static_cast<double>(common.size()) / static_cast<double>(a.size());
    return 2.0 * p * r / (p + r);
}

/// Textbook LRU over string keys: front is least recently used.
class LruSim {
public:
    explicit LruSim(std::size_t capacity) : capacity_(capacity) {}

    bool get(const std::string &key)
    {
        auto it = std::find(order_.begin(), order_.end(), key);
        if (it == order_.end()) {
            return false;
        }
        order_.erase(it);
        order_.push_back(key);
        return true;
    }

    void put(const std::string &key)
    {
        auto it = std::find(order_.begin(), order_.end(), key);
        if (it != order_.end()) {
            order_.erase(it);
        }
        order_.push_back(key);
        while (order_.size() > capacity_) {
            order_.pop_front();
        }
    }

    [[nodiscard]] std::vector<std::string> keys() const { return {order_.begin(), order_.end()}; }

private:
    std::size_t capacity_;
    std::list<std::string> order_;
};

/// SQuAD-style answer scoring, rebuilt token-wise: per-code-point lowercase, strip ASCII
/// punctuation, split on whitespace, drop whole-token articles.
inline std::vector<std::string> ref_answer_tokens(const std::string &text)
{
    std::string cleaned;
    const auto *bytes = reinterpret_cast<const std::uint8_t *>(text.data());
    const auto len = static_cast<std::int32_t>(text.size());
    for (std::int32_t i = 0; i < len;) {
        UChar32 cp = 0;
        U8_NEXT(bytes, i, len, cp);
        if (cp < 0) {
            cp = 0xFFFD;
        }
        if (cp < 0x80 && std::ispunct(static_cast<int>(cp))) {
            continue;
        }
        cp = u_tolower(cp);
        char buf[4];
        std::int32_t n = 0;
        UBool err = false;
        U8_APPEND(reinterpret_cast<std::uint8_t *>(buf), n, 4, cp, err);
        cleaned.append(buf, static_cast<std::size_t>(n));
    }
    std::istringstream in(cleaned);
    std::vector<std::string> out;
    for (std::string tok; in >> tok;) {
        if (tok != "a" && tok != "an" && tok != "the") {
            out.push_back(tok);
        }
    }
    return out;
}

inline std::string ref_normalize(const std::string &text)
{
    std::string out;
    for (const auto &t : ref_answer_tokens(text)) {
        out += out.empty() ? t : " " + t;
    }
    return out;
}

inline int ref_em(const std::string &pred, const std::vector<std::string> &golds)
{
    int best = 0;
    for (const auto &g : golds) {
        best = std::max(best, ref_normalize(pred) == ref_normalize(g) ? 1 : 0);
    }
    return best;
}

inline double ref_f1(const std::string &pred, const std::vector<std::string> &golds)
{
    double best = 0.0;
    for (const auto &g : golds) {
        const auto p = ref_answer_tokens(pred);
        const auto t = ref_answer_tokens(g);
        double f = 0.0;
        if (p.empty() || t.empty()) {
            f = p == t ? 1.0 : 0.0;
        } else {
            f = overlap_f1_ref(t, p);
        }
        best = std::max(best, f);
    }
    return best;
}

inline int ref_succ(const std::vector<std::string> &texts, const std::vector<std::string> &golds, std::size_t k)
{
    for (std::size_t i = 0; i < std::min(k, texts.size()); ++i) {
        const auto hay = ref_normalize(texts[i]);
        for (const auto &g : golds) {
            const auto needle = ref_normalize(g);
            if (!needle.empty() && hay.find(needle) != std::string::npos) {
                return 1;
            }
        }
    }
    return 0;
}

} // namespace flexkit::testing
