#include "flexkit/query_cache.hpp"

#include "flexkit/errors.hpp"
#include "flexkit/retriever.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <spdlog/spdlog.h>
#include <unicode/normalizer2.h>
#include <unicode/unistr.h>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace flexkit {

namespace fs = std::filesystem;

std::string normalize_query(std::string_view query)
{
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2 *nfc = icu::Normalizer2::getNFCInstance(status);
    if (U_FAILURE(status)) {
        throw Error(std::string("ICU NFC normalizer unavailable: ") + u_errorName(status));
    }
    const auto input = icu::UnicodeString::fromUTF8(icu::StringPiece(query.data(), static_cast<int32_t>(query.size())));
    const auto normalized = nfc->normalize(input, status);
    if (U_FAILURE(status)) {
        throw InvalidArgument(std::string("query normalization failed: ") + u_errorName(status));
    }
    std::string utf8;
    normalized.toUTF8String(utf8);

    std::string out;
    out.reserve(utf8.size());
    std::istringstream words(utf8);
    std::string word;
    while (words >> word) {
        if (!out.empty()) {
            out += ' ';
        }
        out += word;
    }
    return out;
}

namespace {

constexpr std::string_view kManifest = "manifest";
constexpr std::string_view kLockFile = "lock";

void write_atomically(const fs::path &path, std::string_view bytes)
{
    fs::path tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw IoError("cannot write cache file " + tmp.string());
        }
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out.flush()) {
            throw IoError("cannot write cache file " + tmp.string());
        }
    }
    fs::rename(tmp, path);
}

std::optional<std::string> read_file(const fs::path &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        return std::nullopt;
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::move(ss).str();
}

bool is_key_hex(std::string_view s)
{
    return s.size() == 32 && std::all_of(s.begin(), s.end(), [](char c) {
               return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
           });
}

std::uint32_t payload_crc(const std::string &payload)
{
    return crc32(std::as_bytes(std::span(payload.data(), payload.size())));
}

} // namespace

/// Process mutex plus an exclusive flock on <dir>/lock.
class QueryCache::Lock {
public:
    explicit Lock(const QueryCache &cache) : guard_(cache.mutex_)
    {
        const auto path = cache.dir_ / kLockFile;
        fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
        if (fd_ < 0) {
            throw_errno("cannot open cache lock " + path.string());
        }
        while (::flock(fd_, LOCK_EX) != 0) {
            if (errno != EINTR) {
                ::close(fd_);
                throw_errno("cannot lock cache " + path.string());
            }
        }
    }
    ~Lock()
    {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }
    Lock(const Lock &) = delete;
    Lock &operator=(const Lock &) = delete;

private:
    std::lock_guard<std::mutex> guard_;
    int fd_ = -1;
};

QueryCache::QueryCache(fs::path dir, std::size_t capacity) : dir_(std::move(dir)), capacity_(capacity)
{
    if (capacity_ == 0) {
        throw InvalidArgument("cache capacity must be >= 1");
    }
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec || ::access(dir_.c_str(), W_OK) != 0) {
        throw IoError("cache directory is not writable: " + dir_.string());
    }
    reconcile();
}

Digest128 QueryCache::make_key(const Digest128 &fingerprint, std::string_view query, std::size_t k)
{
    Hasher128 h;
    h.field("flexkit-cache-v1");
    h.field(fingerprint.hex());
    h.field(normalize_query(query));
    h.field(std::to_string(k));
    return h.finish();
}

fs::path QueryCache::entry_path(const Digest128 &key) const
{
    const auto hex = key.hex();
    return dir_ / hex.substr(0, 2) / hex.substr(2, 2) / (hex + ".json");
}

std::vector<std::string> QueryCache::load_manifest() const
{
    std::vector<std::string> keys;
    const auto text = read_file(dir_ / kManifest);
    if (!text) {
        return keys;
    }
    std::istringstream in(*text);
    std::string line;
    std::set<std::string> seen;
    while (std::getline(in, line)) {
        if (is_key_hex(line) && seen.insert(line).second) {
            keys.push_back(line);
        }
    }
    return keys;
}

void QueryCache::store_manifest(const std::vector<std::string> &keys) const
{
    std::string text;
    text.reserve(keys.size() * 33);
    for (const auto &k : keys) {
        text += k;
        text += '\n';
    }
    write_atomically(dir_ / kManifest, text);
}

void QueryCache::evict(std::vector<std::string> &keys) const
{
    if (keys.size() <= capacity_) {
        return;
    }
    const std::size_t excess = keys.size() - capacity_;
    for (std::size_t i = 0; i < excess; ++i) {
        std::error_code ec;
        fs::remove(entry_path(Digest128::from_hex(keys[i])), ec);
    }
    keys.erase(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(excess));
}

void QueryCache::reconcile()
{
    Lock lock(*this);
    auto keys = load_manifest();
    std::erase_if(keys, [&](const std::string &k) { return !fs::exists(entry_path(Digest128::from_hex(k))); });

    // Entries written by a process that died before updating the manifest.
    std::set<std::string> listed(keys.begin(), keys.end());
    std::vector<std::string> orphans;
    for (const auto &e : fs::recursive_directory_iterator(dir_)) {
        if (!e.is_regular_file()) {
            continue;
        }
        const auto name = e.path().filename().string();
        if (name.ends_with(".json") && is_key_hex(name.substr(0, name.size() - 5)) &&
            e.path() == entry_path(Digest128::from_hex(name.substr(0, 32))) && !listed.contains(name.substr(0, 32))) {
            orphans.push_back(name.substr(0, 32));
        } else if (name.find(".tmp.") != std::string::npos) {
            std::error_code ec;
            fs::remove(e.path(), ec);
        }
    }
    std::sort(orphans.begin(), orphans.end());
    if (!orphans.empty()) {
        spdlog::debug("cache {}: adopting {} orphan entries", dir_.string(), orphans.size());
    }
    keys.insert(keys.end(), orphans.begin(), orphans.end());
    evict(keys);
    store_manifest(keys);
}

std::optional<std::vector<RetrievedContext>> QueryCache::get(const Digest128 &key)
{
    Lock lock(*this);
    auto keys = load_manifest();
    const auto hex = key.hex();
    auto it = std::find(keys.begin(), keys.end(), hex);
    if (it == keys.end()) {
        return std::nullopt;
    }
    const auto path = entry_path(key);
    std::optional<std::vector<RetrievedContext>> results;
    if (const auto text = read_file(path)) {
        try {
            const auto j = nlohmann::json::parse(*text);
            const auto payload = j.at("results").dump();
            if (j.at("key").get<std::string>() == hex && j.at("crc").get<std::uint32_t>() == payload_crc(payload)) {
                results = contexts_from_json(j.at("results"));
            }
        } catch (const std::exception &) {
            // falls through as corrupt
        }
    }
    keys.erase(it);
    if (results) {
        keys.push_back(hex);
    } else {
        spdlog::warn("cache {}: dropping corrupt entry {}", dir_.string(), hex);
        std::error_code ec;
        fs::remove(path, ec);
    }
    store_manifest(keys);
    return results;
}

void QueryCache::put(const Digest128 &key, const std::vector<RetrievedContext> &results)
{
    const auto hex = key.hex();
    const auto body = to_json(results);
    const auto payload = body.dump();
    nlohmann::json entry;
    entry["key"] = hex;
    entry["crc"] = payload_crc(payload);
    entry["results"] = body;

    Lock lock(*this);
    const auto path = entry_path(key);
    fs::create_directories(path.parent_path());
    write_atomically(path, entry.dump());
    auto keys = load_manifest();
    std::erase(keys, hex);
    keys.push_back(hex);
    evict(keys);
    store_manifest(keys);
}

bool QueryCache::contains(const Digest128 &key) const
{
    Lock lock(*this);
    const auto keys = load_manifest();
    return std::find(keys.begin(), keys.end(), key.hex()) != keys.end();
}

std::vector<Digest128> QueryCache::keys() const
{
    Lock lock(*this);
    std::vector<Digest128> out;
    for (const auto &k : load_manifest()) {
        out.push_back(Digest128::from_hex(k));
    }
    return out;
}

std::size_t QueryCache::size() const
{
    Lock lock(*this);
    return load_manifest().size();
}

void QueryCache::clear()
{
    Lock lock(*this);
    for (const auto &k : load_manifest()) {
        std::error_code ec;
        fs::remove(entry_path(Digest128::from_hex(k)), ec);
    }
    store_manifest({});
}

std::pair<std::vector<RetrievedContext>, bool> cached_retrieve(QueryCache &cache, const Retriever &retriever,
                                                               std::string_view query, std::size_t k)
{
    const auto key = QueryCache::make_key(retriever.fingerprint(), query, k);
    if (auto hit = cache.get(key)) {
        return {std::move(*hit), true};
    }
    auto results = retriever.retrieve(query, k);
    cache.put(key, results);
    return {std::move(results), false};
}

} // namespace flexkit
