#include "flexkit/dense_index.hpp"

#include "flexkit/detail/little_endian.hpp"
#include "flexkit/detail/rng.hpp"
#include "flexkit/errors.hpp"
#include "flexkit/kmeans.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

static_assert(std::endian::native == std::endian::little,
              "dense index regions are read in place and require a little-endian host");

namespace flexkit {

using detail::kPageSize;
using detail::load_le;
using detail::put_le;

namespace {

constexpr char kMagic[4] = {'F', 'D', 'I', '1'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kBuildIdPos = 88;
constexpr std::size_t kRegionTablePos = 104;

struct Header {
    DenseKind kind = DenseKind::flat;
    Metric metric = Metric::inner_product;
    std::uint64_t dim = 0;
    std::uint64_t n = 0;
    std::uint64_t nlist = 0;
    std::uint64_t nprobe = 0;
    std::uint64_t m = 0;
    std::uint64_t nbits = 0;
    std::uint64_t train_iters = 0;
    std::uint64_t seed = 0;
    std::uint64_t trained_on = 0;
    Digest128 build_id;
    std::uint64_t regions[5] = {};
};

std::string encode_header(const Header &h)
{
    std::string out;
    out.append(kMagic, 4);
    put_le<std::uint32_t>(out, kVersion);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(h.kind));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(h.metric));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(h.dim));
    put_le<std::uint32_t>(out, 0);
    put_le<std::uint64_t>(out, h.n);
    put_le<std::uint64_t>(out, h.nlist);
    put_le<std::uint64_t>(out, h.nprobe);
    put_le<std::uint64_t>(out, h.m);
    put_le<std::uint64_t>(out, h.nbits);
    put_le<std::uint64_t>(out, h.train_iters);
    put_le<std::uint64_t>(out, h.seed);
    put_le<std::uint64_t>(out, h.trained_on);
    out.append(reinterpret_cast<const char *>(h.build_id.bytes.data()), 16);
    for (auto r : h.regions) {
        put_le<std::uint64_t>(out, r);
    }
    out.resize(kPageSize, '\0');
    return out;
}

Header decode_header(const MappedFile &file)
{
    if (file.size() < kPageSize) {
        throw FormatError("dense index " + file.path().string() + " is truncated");
    }
    detail::ByteCursor cur(file.bytes());
    if (std::memcmp(cur.read_bytes(4).data(), kMagic, 4) != 0) {
        throw FormatError("not a dense index (bad magic): " + file.path().string());
    }
    if (cur.read<std::uint32_t>() != kVersion) {
        throw FormatError("unsupported dense index version: " + file.path().string());
    }
    Header h;
    const auto kind = cur.read<std::uint32_t>();
    const auto metric = cur.read<std::uint32_t>();
    if (kind > 1 || metric > 1) {
        throw FormatError("corrupt dense index header: " + file.path().string());
    }
    h.kind = static_cast<DenseKind>(kind);
    h.metric = static_cast<Metric>(metric);
    h.dim = cur.read<std::uint32_t>();
    cur.read<std::uint32_t>();
    h.n = cur.read<std::uint64_t>();
    h.nlist = cur.read<std::uint64_t>();
    h.nprobe = cur.read<std::uint64_t>();
    h.m = cur.read<std::uint64_t>();
    h.nbits = cur.read<std::uint64_t>();
    h.train_iters = cur.read<std::uint64_t>();
    h.seed = cur.read<std::uint64_t>();
    h.trained_on = cur.read<std::uint64_t>();
    std::memcpy(h.build_id.bytes.data(), cur.read_bytes(16).data(), 16);
    for (auto &r : h.regions) {
        r = cur.read<std::uint64_t>();
    }
    if (h.dim == 0) {
        throw FormatError("corrupt dense index header (zero dimension): " + file.path().string());
    }
    return h;
}

void append_floats(std::string &out, std::span<const float> values)
{
    const auto *p = reinterpret_cast<const char *>(values.data());
    out.append(p, values.size() * sizeof(float));
}

void pad_page(std::string &out) { out.resize(detail::align_up(out.size(), kPageSize), '\0'); }

Digest128 finalize_and_write(std::string &file, std::uint64_t seed, const std::filesystem::path &path)
{
    Hasher128 h;
    h.update(file);
    std::string s;
    put_le<std::uint64_t>(s, seed);
    h.update(s);
    const auto id = h.finish();
    std::memcpy(file.data() + kBuildIdPos, id.bytes.data(), 16);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write dense index " + path.string());
    }
    out.write(file.data(), static_cast<std::streamsize>(file.size()));
    if (!out) {
        throw IoError("write failed: " + path.string());
    }
    return id;
}

void check_region(const MappedFile &file, std::uint64_t off, std::uint64_t bytes)
{
    if (off % kPageSize != 0 || off > file.size() || bytes > file.size() - off) {
        throw FormatError("dense index " + file.path().string() + " is truncated or corrupt");
    }
}

// Index of the best-scoring centroid under `metric`; ties go to the lower index.
std::size_t assign_coarse(const float *x, std::span<const float> centroids, std::size_t dim, Metric metric)
{
    const std::size_t k = centroids.size() / dim;
    std::size_t best = 0;
    float best_s = -std::numeric_limits<float>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
        const float s = similarity(x, centroids.data() + c * dim, dim, metric);
        if (s > best_s) {
            best_s = s;
            best = c;
        }
    }
    return best;
}

void pack_code(std::uint8_t *dst, std::span<const std::uint16_t> code, std::size_t nbits)
{
    if (nbits == 8) {
        for (std::size_t j = 0; j < code.size(); ++j) {
            dst[j] = static_cast<std::uint8_t>(code[j]);
        }
        return;
    }
    std::fill(dst, dst + (code.size() + 1) / 2, std::uint8_t{0});
    for (std::size_t j = 0; j < code.size(); ++j) {
        dst[j / 2] |= static_cast<std::uint8_t>((code[j] & 0xF) << ((j % 2) * 4));
    }
}

inline std::uint16_t unpack_one(const std::uint8_t *src, std::size_t j, std::size_t nbits) noexcept
{
    if (nbits == 8) {
        return src[j];
    }
    return static_cast<std::uint16_t>((src[j / 2] >> ((j % 2) * 4)) & 0xF);
}

} // namespace

Metric parse_metric(std::string_view name)
{
    if (name == "inner_product" || name == "ip") {
        return Metric::inner_product;
    }
    if (name == "l2") {
        return Metric::l2;
    }
    throw InvalidArgument("unknown metric '" + std::string(name) + "'");
}

std::string_view to_string(Metric metric) noexcept { return metric == Metric::l2 ? "l2" : "inner_product"; }

float similarity(const float *a, const float *b, std::size_t dim, Metric metric) noexcept
{
    if (metric == Metric::l2) {
        return -l2_sq(a, b, dim);
    }
    float s = 0.0f;
    for (std::size_t i = 0; i < dim; ++i) {
        s += a[i] * b[i];
    }
    return s;
}

void IvfPqParams::validate(std::size_t dim, std::size_t n) const
{
    if (dim == 0) {
        throw InvalidArgument("dimension must be positive");
    }
    if (m == 0 || dim % m != 0) {
        throw InvalidArgument("dimension " + std::to_string(dim) + " is not divisible by m=" + std::to_string(m));
    }
    if (nlist == 0) {
        throw InvalidArgument("nlist must be >= 1");
    }
    if (nprobe < 1 || nprobe > nlist) {
        throw InvalidArgument("nprobe must lie in [1, nlist]");
    }
    if (nbits != 4 && nbits != 8) {
        throw InvalidArgument("nbits must be 4 or 8");
    }
    if (n > 0 && nlist > n) {
        throw InvalidArgument("nlist (" + std::to_string(nlist) + ") exceeds the number of vectors (" +
                              std::to_string(n) + ")");
    }
    if (train_iters < 1) {
        throw InvalidArgument("train_iters must be >= 1");
    }
}

IvfPqParams size_ivfpq(std::size_t n_vectors, std::size_t dim)
{
    if (n_vectors < 1) {
        throw InvalidArgument("size_ivfpq requires at least one vector");
    }
    IvfPqParams p;
    const auto raw_nlist = static_cast<std::size_t>(std::llround(4.0 * std::sqrt(static_cast<double>(n_vectors))));
    const std::size_t cap = std::max<std::size_t>(1, n_vectors / kMinTrainPerCentroid);
    p.nlist = std::clamp<std::size_t>(raw_nlist, 1, cap);
    const auto raw_nprobe = static_cast<std::size_t>(std::llround(static_cast<double>(p.nlist) / 8.0));
    p.nprobe = std::clamp<std::size_t>(raw_nprobe, 1, p.nlist);
    p.m = 1;
    for (std::size_t m = std::min<std::size_t>(64, dim); m >= 1; --m) {
        if (dim % m == 0 && dim / m >= 4) {
            p.m = m;
            break;
        }
    }
    p.nbits = 8;
    return p;
}

// ---------------------------------------------------------------------------
// Building

Digest128 build_flat_index(std::span<const float> vectors, std::size_t dim, Metric metric,
                           const std::filesystem::path &out, std::uint64_t build_seed)
{
    if (dim == 0 || vectors.size() % dim != 0) {
        throw InvalidArgument("vector data is not a multiple of the dimension");
    }
    Header h;
    h.kind = DenseKind::flat;
    h.metric = metric;
    h.dim = dim;
    h.n = vectors.size() / dim;
    h.seed = build_seed;
    h.regions[0] = kPageSize;
    std::string file = encode_header(h);
    append_floats(file, vectors);
    return finalize_and_write(file, build_seed, out);
}

IvfPqBuildStats build_ivfpq_index(std::span<const float> vectors, std::size_t dim, const IvfPqParams &params,
                                  std::uint64_t seed, const std::filesystem::path &out)
{
    if (dim == 0 || vectors.size() % dim != 0) {
        throw InvalidArgument("vector data is not a multiple of the dimension");
    }
    const std::size_t n = vectors.size() / dim;
    if (n == 0) {
        throw InvalidArgument("cannot train an IVF-PQ index on zero vectors");
    }
    params.validate(dim, n);
    IvfPqBuildStats stats;

    // Seeded uniform training sample, kept in ascending order.
    const std::size_t sample_n = std::min(n, kMaxTrainPerCentroid * params.nlist);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    detail::Rng rng(seed);
    for (std::size_t i = 0; i < sample_n && sample_n < n; ++i) {
        std::swap(order[i], order[i + rng.below(n - i)]);
    }
    order.resize(sample_n);
    std::sort(order.begin(), order.end());
    std::vector<float> sample(sample_n * dim);
    for (std::size_t i = 0; i < sample_n; ++i) {
        std::copy_n(vectors.data() + order[i] * dim, dim, sample.begin() + static_cast<std::ptrdiff_t>(i * dim));
    }
    stats.training_samples = sample_n;
    stats.undersized_training = sample_n < kMinTrainPerCentroid * params.nlist;
    if (stats.undersized_training) {
        spdlog::warn("IVF-PQ training set has {} vectors, below the recommended {} for nlist={}", sample_n,
                     kMinTrainPerCentroid * params.nlist, params.nlist);
    }

    KMeansOptions coarse_opts;
    coarse_opts.k = params.nlist;
    coarse_opts.max_iter = params.train_iters;
    coarse_opts.seed = seed;
    const auto coarse = kmeans(sample, dim, coarse_opts).centroids;

    // Residuals of the training sample against their assigned coarse centroid.
    std::vector<float> residuals(sample_n * dim);
    for (std::size_t i = 0; i < sample_n; ++i) {
        const float *x = sample.data() + i * dim;
        const auto c = assign_coarse(x, coarse, dim, params.metric);
        for (std::size_t j = 0; j < dim; ++j) {
            residuals[i * dim + j] = x[j] - coarse[c * dim + j];
        }
    }

    const std::size_t dsub = dim / params.m;
    const std::size_t ksub = params.ksub();
    std::vector<float> codebooks(params.m * ksub * dsub);
    std::vector<float> subdata(sample_n * dsub);
    for (std::size_t s = 0; s < params.m; ++s) {
        for (std::size_t i = 0; i < sample_n; ++i) {
            std::copy_n(residuals.data() + i * dim + s * dsub, dsub, subdata.begin() + static_cast<std::ptrdiff_t>(i * dsub));
        }
        KMeansOptions pq_opts;
        pq_opts.k = std::min(ksub, sample_n);
        pq_opts.max_iter = params.train_iters;
        pq_opts.seed = mix64(seed + s + 1);
        const auto trained = kmeans(subdata, dsub, pq_opts).centroids;
        float *book = codebooks.data() + s * ksub * dsub;
        // With fewer samples than codewords the trained centroids are repeated to fill the book;
        // duplicates are never preferred because ties resolve to the lower index.
        for (std::size_t c = 0; c < ksub; ++c) {
            std::copy_n(trained.data() + (c % pq_opts.k) * dsub, dsub, book + c * dsub);
        }
    }

    // Assign and encode every vector.
    const std::size_t code_size = params.code_size();
    std::vector<std::uint32_t> list_of(n);
    std::vector<std::uint8_t> all_codes(n * code_size);
    std::vector<float> residual(dim);
    std::vector<std::uint16_t> code(params.m);
    for (std::size_t i = 0; i < n; ++i) {
        const float *x = vectors.data() + i * dim;
        const auto c = assign_coarse(x, coarse, dim, params.metric);
        list_of[i] = static_cast<std::uint32_t>(c);
        for (std::size_t j = 0; j < dim; ++j) {
            residual[j] = x[j] - coarse[c * dim + j];
        }
        for (std::size_t s = 0; s < params.m; ++s) {
            const auto book = std::span<const float>(codebooks.data() + s * ksub * dsub, ksub * dsub);
            code[s] = static_cast<std::uint16_t>(nearest_centroid(residual.data() + s * dsub, book, dsub).first);
        }
        pack_code(all_codes.data() + i * code_size, code, params.nbits);
    }

    // Group by list; stable so ids stay ascending within each list.
    std::vector<std::uint32_t> by_list(n);
    std::iota(by_list.begin(), by_list.end(), 0u);
    std::stable_sort(by_list.begin(), by_list.end(), [&](auto a, auto b) { return list_of[a] < list_of[b]; });
    std::vector<std::uint64_t> list_len(params.nlist, 0);
    for (auto l : list_of) {
        ++list_len[l];
    }

    Header h;
    h.kind = DenseKind::ivfpq;
    h.metric = params.metric;
    h.dim = dim;
    h.n = n;
    h.nlist = params.nlist;
    h.nprobe = params.nprobe;
    h.m = params.m;
    h.nbits = params.nbits;
    h.train_iters = static_cast<std::uint64_t>(params.train_iters);
    h.seed = seed;
    h.trained_on = sample_n;

    const std::uint64_t coarse_off = kPageSize;
    std::string regions;
    append_floats(regions, coarse);
    pad_page(regions);
    const std::uint64_t codebook_off = kPageSize + regions.size();
    append_floats(regions, codebooks);
    pad_page(regions);
    const std::uint64_t dir_off = kPageSize + regions.size();
    std::uint64_t first = 0;
    for (std::size_t l = 0; l < params.nlist; ++l) {
        put_le<std::uint64_t>(regions, first);
        put_le<std::uint64_t>(regions, list_len[l]);
        first += list_len[l];
    }
    pad_page(regions);
    const std::uint64_t ids_off = kPageSize + regions.size();
    for (auto id : by_list) {
        put_le<std::uint32_t>(regions, id);
    }
    pad_page(regions);
    const std::uint64_t codes_off = kPageSize + regions.size();
    for (auto id : by_list) {
        regions.append(reinterpret_cast<const char *>(all_codes.data() + std::size_t{id} * code_size), code_size);
    }
    h.regions[0] = coarse_off;
    h.regions[1] = codebook_off;
    h.regions[2] = dir_off;
    h.regions[3] = ids_off;
    h.regions[4] = codes_off;

    std::string file = encode_header(h);
    file += regions;
    stats.build_id = finalize_and_write(file, seed, out);
    return stats;
}

// ---------------------------------------------------------------------------
// Reading

void DenseIndex::check_query(std::span<const float> query, std::size_t k) const
{
    if (query.size() != dim_) {
        throw InvalidArgument("query dimension " + std::to_string(query.size()) + " does not match index dimension " +
                              std::to_string(dim_));
    }
    if (k < 1) {
        throw InvalidArgument("k must be >= 1");
    }
}

FlatIndex::FlatIndex(const std::filesystem::path &path)
{
    file_ = MappedFile(path);
    const auto h = decode_header(file_);
    if (h.kind != DenseKind::flat) {
        throw FormatError(path.string() + " is not a FLAT index");
    }
    dim_ = h.dim;
    n_ = h.n;
    metric_ = h.metric;
    build_id_ = h.build_id;
    check_region(file_, h.regions[0], n_ * dim_ * sizeof(float));
    vectors_ = reinterpret_cast<const float *>(file_.data() + h.regions[0]);
}

std::span<const float> FlatIndex::vector(DocId id) const
{
    if (id >= n_) {
        throw NotFound("doc id out of range for dense index");
    }
    return {vectors_ + id * dim_, dim_};
}

std::vector<SearchHit> FlatIndex::search(std::span<const float> query, std::size_t k, std::optional<std::size_t>) const
{
    check_query(query, k);
    std::vector<SearchHit> hits(n_);
    for (std::size_t i = 0; i < n_; ++i) {
        hits[i] = SearchHit{i, similarity(query.data(), vectors_ + i * dim_, dim_, metric_)};
    }
    keep_top_k(hits, k);
    return hits;
}

IvfPqIndex::IvfPqIndex(const std::filesystem::path &path)
{
    file_ = MappedFile(path);
    const auto h = decode_header(file_);
    if (h.kind != DenseKind::ivfpq) {
        throw FormatError(path.string() + " is not an IVF-PQ index");
    }
    dim_ = h.dim;
    n_ = h.n;
    metric_ = h.metric;
    build_id_ = h.build_id;
    params_.nlist = h.nlist;
    params_.nprobe = h.nprobe;
    params_.m = h.m;
    params_.nbits = h.nbits;
    params_.metric = h.metric;
    params_.train_iters = static_cast<int>(h.train_iters);
    seed_ = h.seed;
    trained_on_ = h.trained_on;
    params_.validate(dim_, n_);

    const std::size_t dsub = dim_ / params_.m;
    check_region(file_, h.regions[0], params_.nlist * dim_ * sizeof(float));
    check_region(file_, h.regions[1], params_.m * params_.ksub() * dsub * sizeof(float));
    check_region(file_, h.regions[2], params_.nlist * 16);
    check_region(file_, h.regions[3], n_ * 4);
    check_region(file_, h.regions[4], n_ * params_.code_size());
    coarse_ = reinterpret_cast<const float *>(file_.data() + h.regions[0]);
    codebooks_ = reinterpret_cast<const float *>(file_.data() + h.regions[1]);
    directory_ = file_.data() + h.regions[2];
    ids_ = reinterpret_cast<const std::uint32_t *>(file_.data() + h.regions[3]);
    codes_ = reinterpret_cast<const std::uint8_t *>(file_.data() + h.regions[4]);

    std::uint64_t total = 0;
    for (std::size_t l = 0; l < params_.nlist; ++l) {
        const auto first = load_le<std::uint64_t>(directory_ + l * 16);
        const auto len = load_le<std::uint64_t>(directory_ + l * 16 + 8);
        if (first != total) {
            throw FormatError("corrupt IVF list directory in " + path.string());
        }
        total += len;
    }
    if (total != n_) {
        throw FormatError("IVF list lengths do not sum to N in " + path.string());
    }
}

std::span<const float> IvfPqIndex::coarse_centroid(std::size_t list) const
{
    if (list >= params_.nlist) {
        throw NotFound("list id out of range");
    }
    return {coarse_ + list * dim_, dim_};
}

std::span<const float> IvfPqIndex::pq_centroid(std::size_t sub, std::size_t c) const
{
    const std::size_t dsub = dim_ / params_.m;
    if (sub >= params_.m || c >= params_.ksub()) {
        throw NotFound("PQ centroid out of range");
    }
    return {codebooks_ + (sub * params_.ksub() + c) * dsub, dsub};
}

std::size_t IvfPqIndex::list_size(std::size_t list) const
{
    if (list >= params_.nlist) {
        throw NotFound("list id out of range");
    }
    return load_le<std::uint64_t>(directory_ + list * 16 + 8);
}

std::span<const std::uint32_t> IvfPqIndex::list_ids(std::size_t list) const
{
    const auto len = list_size(list);
    const auto first = load_le<std::uint64_t>(directory_ + list * 16);
    return {ids_ + first, len};
}

std::span<const std::uint8_t> IvfPqIndex::list_codes(std::size_t list) const
{
    const auto len = list_size(list);
    const auto first = load_le<std::uint64_t>(directory_ + list * 16);
    return {codes_ + first * params_.code_size(), len * params_.code_size()};
}

std::vector<std::uint16_t> IvfPqIndex::code(std::size_t list, std::size_t pos) const
{
    const auto codes = list_codes(list);
    if (pos >= list_size(list)) {
        throw NotFound("list position out of range");
    }
    std::vector<std::uint16_t> out(params_.m);
    const auto *src = codes.data() + pos * params_.code_size();
    for (std::size_t j = 0; j < params_.m; ++j) {
        out[j] = unpack_one(src, j, params_.nbits);
    }
    return out;
}

std::vector<float> IvfPqIndex::reconstruct(std::size_t list, std::span<const std::uint16_t> code) const
{
    const auto c = coarse_centroid(list);
    std::vector<float> out(c.begin(), c.end());
    const std::size_t dsub = dim_ / params_.m;
    for (std::size_t j = 0; j < params_.m; ++j) {
        const auto sub = pq_centroid(j, code[j]);
        for (std::size_t d = 0; d < dsub; ++d) {
            out[j * dsub + d] += sub[d];
        }
    }
    return out;
}

std::vector<float> IvfPqIndex::lookup_table(std::span<const float> target) const
{
    const std::size_t dsub = dim_ / params_.m;
    const std::size_t ksub = params_.ksub();
    std::vector<float> table(params_.m * ksub);
    for (std::size_t j = 0; j < params_.m; ++j) {
        const float *t = target.data() + j * dsub;
        for (std::size_t c = 0; c < ksub; ++c) {
            const float *cb = codebooks_ + (j * ksub + c) * dsub;
            table[j * ksub + c] = metric_ == Metric::l2 ? l2_sq(t, cb, dsub) : similarity(t, cb, dsub, Metric::inner_product);
        }
    }
    return table;
}

float IvfPqIndex::adc_score(std::span<const float> query, std::size_t list, std::span<const std::uint16_t> code) const
{
    const std::size_t ksub = params_.ksub();
    const auto c = coarse_centroid(list);
    if (metric_ == Metric::l2) {
        std::vector<float> residual(dim_);
        for (std::size_t d = 0; d < dim_; ++d) {
            residual[d] = query[d] - c[d];
        }
        const auto table = lookup_table(residual);
        float dist = 0.0f;
        for (std::size_t j = 0; j < params_.m; ++j) {
            dist += table[j * ksub + code[j]];
        }
        return -dist;
    }
    const auto table = lookup_table(query);
    float s = similarity(query.data(), c.data(), dim_, Metric::inner_product);
    for (std::size_t j = 0; j < params_.m; ++j) {
        s += table[j * ksub + code[j]];
    }
    return s;
}

std::vector<std::size_t> IvfPqIndex::probe_order(std::span<const float> query, std::size_t nprobe) const
{
    std::vector<std::pair<float, std::size_t>> scored(params_.nlist);
    for (std::size_t l = 0; l < params_.nlist; ++l) {
        scored[l] = {similarity(query.data(), coarse_ + l * dim_, dim_, metric_), l};
    }
    nprobe = std::min(nprobe, params_.nlist);
    auto better = [](const auto &a, const auto &b) { return a.first != b.first ? a.first > b.first : a.second < b.second; };
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(nprobe), scored.end(), better);
    std::vector<std::size_t> out(nprobe);
    for (std::size_t i = 0; i < nprobe; ++i) {
        out[i] = scored[i].second;
    }
    return out;
}

std::vector<SearchHit> IvfPqIndex::search(std::span<const float> query, std::size_t k,
                                          std::optional<std::size_t> nprobe_override) const
{
    check_query(query, k);
    const std::size_t nprobe = nprobe_override.value_or(params_.nprobe);
    if (nprobe < 1) {
        throw InvalidArgument("nprobe must be >= 1");
    }
    const std::size_t ksub = params_.ksub();
    const std::size_t code_size = params_.code_size();
    const std::size_t m = params_.m;
    const std::size_t nbits = params_.nbits;

    std::vector<float> table;
    if (metric_ == Metric::inner_product) {
        table = lookup_table(query);
    }
    std::vector<float> residual(dim_);
    std::vector<SearchHit> hits;
    for (const auto list : probe_order(query, nprobe)) {
        const float *c = coarse_ + list * dim_;
        float base = 0.0f;
        if (metric_ == Metric::l2) {
            for (std::size_t d = 0; d < dim_; ++d) {
                residual[d] = query[d] - c[d];
            }
            table = lookup_table(residual);
        } else {
            base = similarity(query.data(), c, dim_, Metric::inner_product);
        }
        const auto ids = list_ids(list);
        const auto codes = list_codes(list);
        for (std::size_t i = 0; i < ids.size(); ++i) {
            const std::uint8_t *code = codes.data() + i * code_size;
            float acc = 0.0f;
            for (std::size_t j = 0; j < m; ++j) {
                acc += table[j * ksub + unpack_one(code, j, nbits)];
            }
            const float score = metric_ == Metric::l2 ? -acc : base + acc;
            hits.push_back(SearchHit{ids[i], score});
        }
    }
    keep_top_k(hits, k);
    return hits;
}

std::unique_ptr<DenseIndex> open_dense_index(const std::filesystem::path &path)
{
    DenseKind kind;
    {
        const MappedFile probe(path);
        kind = decode_header(probe).kind;
    }
    if (kind == DenseKind::ivfpq) {
        return std::make_unique<IvfPqIndex>(path);
    }
    return std::make_unique<FlatIndex>(path);
}

} // namespace flexkit
