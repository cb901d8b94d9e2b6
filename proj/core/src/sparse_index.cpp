#include "flexkit/sparse_index.hpp"

#include "flexkit/detail/little_endian.hpp"
#include "flexkit/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

namespace flexkit {

using detail::load_le;
using detail::put_le;

namespace {

constexpr char kMagic[4] = {'F', 'S', 'I', '1'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kFlagStopwords = 1u << 0;
constexpr std::uint32_t kFlagStem = 1u << 1;
// magic + version + flags + N + avgdl + k1 + b + vocab + postings + build id + 5 offsets
constexpr std::size_t kHeaderSize = 4 + 4 + 4 + 8 + 8 + 8 + 8 + 8 + 8 + 16 + 5 * 8;
constexpr std::size_t kBuildIdPos = 4 + 4 + 4 + 8 + 8 + 8 + 8 + 8 + 8;
constexpr std::size_t kDirEntrySize = 8 + 4 + 4 + 8;

void pad_to(std::string &buf, std::size_t alignment)
{
    buf.append(detail::align_up(buf.size(), alignment) - buf.size(), '\0');
}

} // namespace

void Bm25Params::validate() const
{
    if (!(k1 >= 0.0) || !std::isfinite(k1)) {
        throw InvalidArgument("BM25 k1 must be >= 0");
    }
    if (!(b >= 0.0 && b <= 1.0)) {
        throw InvalidArgument("BM25 b must lie in [0, 1]");
    }
}

double bm25_idf(std::uint64_t n_docs, std::uint64_t df) noexcept
{
    const double n = static_cast<double>(n_docs);
    const double d = static_cast<double>(df);
    return std::log(1.0 + (n - d + 0.5) / (d + 0.5));
}

double bm25_term_score(double idf, double tf, double doc_len, double avgdl, const Bm25Params &p) noexcept
{
    const double norm = avgdl > 0.0 ? doc_len / avgdl : 0.0;
    return idf * (tf * (p.k1 + 1.0)) / (tf + p.k1 * (1.0 - p.b + p.b * norm));
}

// ---------------------------------------------------------------------------
// Builder

Bm25Builder::Bm25Builder(SparseBuildOptions options) : options_(options) { options_.params.validate(); }

void Bm25Builder::add(std::string_view text)
{
    if (doc_lengths_.size() >= std::numeric_limits<std::uint32_t>::max()) {
        throw InvalidArgument("sparse index supports at most 2^32-1 documents");
    }
    const auto doc = static_cast<std::uint32_t>(doc_lengths_.size());
    auto terms = analyze(text, options_.analyzer);
    doc_lengths_.push_back(static_cast<std::uint32_t>(terms.size()));
    std::sort(terms.begin(), terms.end());
    for (std::size_t i = 0; i < terms.size();) {
        std::size_t j = i;
        while (j < terms.size() && terms[j] == terms[i]) {
            ++j;
        }
        auto it = postings_.find(terms[i]);
        if (it == postings_.end()) {
            it = postings_.emplace(terms[i], std::vector<std::pair<std::uint32_t, std::uint32_t>>{}).first;
        }
        it->second.emplace_back(doc, static_cast<std::uint32_t>(j - i));
        i = j;
    }
}

Digest128 Bm25Builder::write(const std::filesystem::path &path) const
{
    const std::uint64_t n = doc_lengths_.size();
    std::uint64_t total_len = 0;
    std::uint64_t total_postings = 0;
    for (auto len : doc_lengths_) {
        total_len += len;
    }
    for (const auto &[term, list] : postings_) {
        total_postings += list.size();
    }
    const double avgdl = n == 0 ? 0.0 : static_cast<double>(total_len) / static_cast<double>(n);
    std::uint32_t flags = 0;
    flags |= options_.analyzer.remove_stopwords ? kFlagStopwords : 0u;
    flags |= options_.analyzer.stem ? kFlagStem : 0u;

    std::string terms;
    std::string dir;
    std::string doc_ids;
    std::string tfs;
    std::uint64_t first = 0;
    for (const auto &[term, list] : postings_) {
        put_le<std::uint64_t>(dir, terms.size());
        put_le<std::uint32_t>(dir, static_cast<std::uint32_t>(term.size()));
        put_le<std::uint32_t>(dir, static_cast<std::uint32_t>(list.size()));
        put_le<std::uint64_t>(dir, first);
        terms += term;
        for (const auto &[doc, tf] : list) {
            put_le<std::uint32_t>(doc_ids, doc);
            put_le<std::uint32_t>(tfs, tf);
        }
        first += list.size();
    }

    std::string file;
    file.append(kMagic, 4);
    put_le<std::uint32_t>(file, kVersion);
    put_le<std::uint32_t>(file, flags);
    put_le<std::uint64_t>(file, n);
    put_le<double>(file, avgdl);
    put_le<double>(file, options_.params.k1);
    put_le<double>(file, options_.params.b);
    put_le<std::uint64_t>(file, postings_.size());
    put_le<std::uint64_t>(file, total_postings);
    file.append(16, '\0'); // build id, patched below
    const std::size_t offsets_pos = file.size();
    file.append(5 * 8, '\0');

    std::uint64_t offs[5];
    pad_to(file, 8);
    offs[0] = file.size();
    file += terms;
    pad_to(file, 8);
    offs[1] = file.size();
    file += dir;
    pad_to(file, 8);
    offs[2] = file.size();
    file += doc_ids;
    pad_to(file, 8);
    offs[3] = file.size();
    file += tfs;
    pad_to(file, 8);
    offs[4] = file.size();
    for (auto len : doc_lengths_) {
        put_le<std::uint32_t>(file, len);
    }
    for (int i = 0; i < 5; ++i) {
        detail::store_le<std::uint64_t>(reinterpret_cast<std::byte *>(file.data() + offsets_pos + 8 * i), offs[i]);
    }

    Hasher128 h;
    h.update(file);
    std::string seed;
    put_le<std::uint64_t>(seed, options_.build_seed);
    h.update(seed);
    const Digest128 id = h.finish();
    std::memcpy(file.data() + kBuildIdPos, id.bytes.data(), id.bytes.size());

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write sparse index " + path.string());
    }
    out.write(file.data(), static_cast<std::streamsize>(file.size()));
    if (!out) {
        throw IoError("write failed: " + path.string());
    }
    return id;
}

Digest128 build_sparse_index(const StoreReader &store, std::string_view field, const std::filesystem::path &out,
                             const SparseBuildOptions &options)
{
    if (!store.has_field(field)) {
        throw InvalidArgument("field '" + std::string(field) + "' is not in the store schema");
    }
    Bm25Builder builder(options);
    const std::string key(field);
    for (DocId id = 0; id < store.size(); ++id) {
        const auto doc = store.get(id);
        const auto it = doc.fields.find(key);
        builder.add(it == doc.fields.end() ? std::string_view{} : std::string_view(it->second));
    }
    return builder.write(out);
}

// ---------------------------------------------------------------------------
// Reader

std::uint32_t PostingView::doc(std::size_t i) const noexcept { return load_le<std::uint32_t>(doc_ids.data() + 4 * i); }

std::uint32_t PostingView::tf(std::size_t i) const noexcept { return load_le<std::uint32_t>(term_freqs.data() + 4 * i); }

Bm25Index::Bm25Index(const std::filesystem::path &path) : file_(path)
{
    detail::ByteCursor cur(file_.bytes());
    try {
        const auto magic = cur.read_bytes(4);
        if (std::memcmp(magic.data(), kMagic, 4) != 0) {
            throw FormatError("bad magic");
        }
        if (cur.read<std::uint32_t>() != kVersion) {
            throw FormatError("unsupported version");
        }
        const auto flags = cur.read<std::uint32_t>();
        analyzer_.remove_stopwords = (flags & kFlagStopwords) != 0;
        analyzer_.stem = (flags & kFlagStem) != 0;
        n_docs_ = cur.read<std::uint64_t>();
        avgdl_ = cur.read<double>();
        params_.k1 = cur.read<double>();
        params_.b = cur.read<double>();
        vocab_size_ = cur.read<std::uint64_t>();
        total_postings_ = cur.read<std::uint64_t>();
        const auto id = cur.read_bytes(16);
        std::memcpy(build_id_.bytes.data(), id.data(), 16);
        terms_off_ = cur.read<std::uint64_t>();
        dir_off_ = cur.read<std::uint64_t>();
        docids_off_ = cur.read<std::uint64_t>();
        tfs_off_ = cur.read<std::uint64_t>();
        doclen_off_ = cur.read<std::uint64_t>();
    } catch (const FormatError &e) {
        throw FormatError("not a valid sparse index " + path.string() + ": " + e.what());
    }
    const auto size = file_.size();
    if (dir_off_ + vocab_size_ * kDirEntrySize > size || docids_off_ + total_postings_ * 4 > size ||
        tfs_off_ + total_postings_ * 4 > size || doclen_off_ + n_docs_ * 4 != size || terms_off_ > dir_off_) {
        throw FormatError("sparse index " + path.string() + " is truncated or inconsistent");
    }
    static_assert(kHeaderSize == 4 + 4 + 4 + 8 * 6 + 16 + 40);
}

std::string_view Bm25Index::term_view(std::uint64_t term_id) const
{
    const auto *e = file_.data() + dir_off_ + term_id * kDirEntrySize;
    const auto off = load_le<std::uint64_t>(e);
    const auto len = load_le<std::uint32_t>(e + 8);
    return {reinterpret_cast<const char *>(file_.data() + terms_off_ + off), len};
}

std::string Bm25Index::term(std::uint64_t term_id) const
{
    if (term_id >= vocab_size_) {
        throw NotFound("term id out of range");
    }
    return std::string(term_view(term_id));
}

std::int64_t Bm25Index::find_term(std::string_view term) const
{
    std::uint64_t lo = 0;
    std::uint64_t hi = vocab_size_;
    while (lo < hi) {
        const auto mid = lo + (hi - lo) / 2;
        const auto t = term_view(mid);
        if (t < term) {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    if (lo < vocab_size_ && term_view(lo) == term) {
        return static_cast<std::int64_t>(lo);
    }
    return -1;
}

PostingView Bm25Index::postings_of(std::uint64_t term_id) const
{
    const auto *e = file_.data() + dir_off_ + term_id * kDirEntrySize;
    const auto df = load_le<std::uint32_t>(e + 12);
    const auto first = load_le<std::uint64_t>(e + 16);
    return PostingView{file_.bytes().subspan(docids_off_ + first * 4, std::size_t{df} * 4),
                       file_.bytes().subspan(tfs_off_ + first * 4, std::size_t{df} * 4)};
}

std::uint32_t Bm25Index::df(std::string_view term) const
{
    const auto id = find_term(term);
    return id < 0 ? 0 : static_cast<std::uint32_t>(postings_of(static_cast<std::uint64_t>(id)).size());
}

PostingView Bm25Index::postings(std::string_view term) const
{
    const auto id = find_term(term);
    return id < 0 ? PostingView{} : postings_of(static_cast<std::uint64_t>(id));
}

std::uint32_t Bm25Index::doc_length(DocId id) const
{
    if (id >= n_docs_) {
        throw NotFound("doc id out of range for sparse index");
    }
    return load_le<std::uint32_t>(file_.data() + doclen_off_ + id * 4);
}

std::vector<std::string> Bm25Index::analyze_query(std::string_view query) const { return analyze(query, analyzer_); }

std::vector<SearchHit> Bm25Index::search(std::string_view query, std::size_t k) const
{
    return search_terms(analyze_query(query), k);
}

std::vector<SearchHit> Bm25Index::search_terms(std::vector<std::string> terms, std::size_t k) const
{
    if (k < 1) {
        throw InvalidArgument("k must be >= 1");
    }
    std::sort(terms.begin(), terms.end());
    terms.erase(std::unique(terms.begin(), terms.end()), terms.end());
    if (n_docs_ == 0) {
        return {};
    }

    std::vector<double> acc;
    std::vector<std::uint32_t> touched;
    for (const auto &t : terms) {
        const auto id = find_term(t);
        if (id < 0) {
            continue;
        }
        if (acc.empty()) {
            acc.assign(n_docs_, 0.0);
        }
        const auto plist = postings_of(static_cast<std::uint64_t>(id));
        const double idf = bm25_idf(n_docs_, plist.size());
        for (std::size_t i = 0; i < plist.size(); ++i) {
            const auto doc = plist.doc(i);
            const double dl = load_le<std::uint32_t>(file_.data() + doclen_off_ + std::size_t{doc} * 4);
            if (acc[doc] == 0.0) {
                touched.push_back(doc);
            }
            acc[doc] += bm25_term_score(idf, plist.tf(i), dl, avgdl_, params_);
        }
    }
    std::vector<SearchHit> hits;
    hits.reserve(touched.size());
    for (auto doc : touched) {
        hits.push_back(SearchHit{doc, acc[doc]});
    }
    keep_top_k(hits, k);
    return hits;
}

} // namespace flexkit
