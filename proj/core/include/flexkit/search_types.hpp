#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#include "flexkit/corpus_store.hpp"

namespace flexkit {

struct SearchHit {
    DocId doc_id = 0;
    double score = 0.0;

    friend bool operator==(const SearchHit &, const SearchHit &) = default;
};

/// Score descending, ties by ascending doc id.
inline bool ranks_before(const SearchHit &a, const SearchHit &b) noexcept
{
    return a.score != b.score ? a.score > b.score : a.doc_id < b.doc_id;
}

/// Keeps the best k hits in rank order.
inline void keep_top_k(std::vector<SearchHit> &hits, std::size_t k)
{
    if (hits.size() > k) {
        std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(k), hits.end(), ranks_before);
        hits.resize(k);
    } else {
        std::sort(hits.begin(), hits.end(), ranks_before);
    }
}

} // namespace flexkit
