#include "flexkit/corpus_store.hpp"

#include "flexkit/detail/little_endian.hpp"
#include "flexkit/errors.hpp"
#include "flexkit/hashing.hpp"

#include <json.hpp>

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cstring>
#include <istream>
#include <set>
#include <utility>

namespace flexkit {

using detail::load_le;
using detail::put_le;

namespace {

constexpr std::size_t kFixedHeaderSize = 4 + 4 + 8 + 8;
constexpr std::size_t kWriteBufferSize = 1 << 20;

nlohmann::json string_map_to_json(const std::map<std::string, std::string> &m)
{
    auto obj = nlohmann::json::object();
    for (const auto &[k, v] : m) {
        obj[k] = v;
    }
    return obj;
}

std::map<std::string, std::string> json_to_string_map(const nlohmann::json &j, std::string_view what)
{
    if (!j.is_object()) {
        throw FormatError(std::string(what) + " must be a JSON object");
    }
    std::map<std::string, std::string> out;
    for (const auto &[k, v] : j.items()) {
        if (!v.is_string()) {
            throw FormatError(std::string(what) + " value for '" + k + "' must be a string");
        }
        out.emplace(k, v.get<std::string>());
    }
    return out;
}

void validate_schema(const std::vector<std::string> &schema)
{
    if (schema.empty()) {
        throw InvalidArgument("store schema must declare at least one field");
    }
    std::set<std::string_view> seen;
    for (const auto &name : schema) {
        if (name.empty()) {
            throw InvalidArgument("store schema field names must be non-empty");
        }
        if (name.size() > 0xFFFF) {
            throw InvalidArgument("store schema field name too long");
        }
        if (!seen.insert(name).second) {
            throw InvalidArgument("duplicate field '" + name + "' in store schema");
        }
    }
    if (schema.size() > 0xFFFF) {
        throw InvalidArgument("store schema has too many fields");
    }
}

} // namespace

std::string Document::joined_text() const
{
    std::string out;
    for (const auto &[name, text] : fields) {
        if (text.empty()) {
            continue;
        }
        if (!out.empty()) {
            out.push_back('\n');
        }
        out += text;
    }
    return out;
}

std::string serialize_document(const Document &doc)
{
    nlohmann::json j;
    j["fields"] = string_map_to_json(doc.fields);
    j["metadata"] = string_map_to_json(doc.metadata);
    try {
        // nlohmann::json objects are std::map-backed, so keys come out sorted.
        return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::strict);
    } catch (const nlohmann::json::type_error &e) {
        throw InvalidArgument(std::string("document is not valid UTF-8: ") + e.what());
    }
}

Document deserialize_document(std::string_view payload, DocId doc_id)
{
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(payload);
    } catch (const nlohmann::json::parse_error &e) {
        throw FormatError(std::string("corrupt document record: ") + e.what());
    }
    if (!j.is_object() || !j.contains("fields")) {
        throw FormatError("corrupt document record: missing 'fields'");
    }
    Document doc;
    doc.doc_id = doc_id;
    doc.fields = json_to_string_map(j.at("fields"), "fields");
    if (j.contains("metadata")) {
        doc.metadata = json_to_string_map(j.at("metadata"), "metadata");
    }
    return doc;
}

// ---------------------------------------------------------------------------
// StoreWriter

StoreWriter StoreWriter::create(const std::filesystem::path &path, std::vector<std::string> schema,
                                CreateOptions options)
{
    validate_schema(schema);
    int flags = O_WRONLY | O_CREAT | O_CLOEXEC;
    flags |= options.overwrite ? O_TRUNC : O_EXCL;
    const int fd = ::open(path.c_str(), flags, 0644);
    if (fd < 0) {
        if (errno == EEXIST) {
            throw IoError("store " + path.string() + " already exists (pass overwrite to replace it)");
        }
        throw_errno("create " + path.string());
    }
    StoreWriter writer(fd, path, std::move(schema));

    std::string header;
    header.append(kStoreMagic, 4);
    put_le<std::uint32_t>(header, kStoreVersion);
    put_le<std::uint64_t>(header, 0);
    put_le<std::uint64_t>(header, 0);
    put_le<std::uint16_t>(header, static_cast<std::uint16_t>(writer.schema_.size()));
    for (const auto &name : writer.schema_) {
        put_le<std::uint16_t>(header, static_cast<std::uint16_t>(name.size()));
        header += name;
    }
    writer.write_all(header);
    return writer;
}

StoreWriter::StoreWriter(int fd, std::filesystem::path path, std::vector<std::string> schema)
    : fd_(fd), path_(std::move(path)), schema_(std::move(schema))
{
    buffer_.reserve(kWriteBufferSize);
}

StoreWriter::StoreWriter(StoreWriter &&other) noexcept
    : fd_(std::exchange(other.fd_, -1)),
      path_(std::move(other.path_)),
      schema_(std::move(other.schema_)),
      offsets_(std::move(other.offsets_)),
      pos_(other.pos_),
      buffer_(std::move(other.buffer_))
{
}

StoreWriter &StoreWriter::operator=(StoreWriter &&other) noexcept
{
    if (this != &other) {
        try {
            close();
        } catch (...) {
        }
        fd_ = std::exchange(other.fd_, -1);
        path_ = std::move(other.path_);
        schema_ = std::move(other.schema_);
        offsets_ = std::move(other.offsets_);
        pos_ = other.pos_;
        buffer_ = std::move(other.buffer_);
    }
    return *this;
}

StoreWriter::~StoreWriter()
{
    try {
        close();
    } catch (...) {
    }
}

DocId StoreWriter::append(const Document &doc)
{
    if (!is_open()) {
        throw InvalidArgument("store writer is closed");
    }
    bool any_text = false;
    for (const auto &[name, text] : doc.fields) {
        if (std::find(schema_.begin(), schema_.end(), name) == schema_.end()) {
            throw InvalidArgument("field '" + name + "' is not in the store schema");
        }
        any_text = any_text || !text.empty();
    }
    if (!any_text) {
        throw InvalidArgument("document must have at least one non-empty field");
    }
    const std::string payload = serialize_document(doc);
    if (payload.size() > 0xFFFFFFFFu) {
        throw InvalidArgument("document record exceeds 4 GiB");
    }
    const DocId id = offsets_.size();
    offsets_.push_back(pos_);
    std::string prefix;
    put_le<std::uint32_t>(prefix, static_cast<std::uint32_t>(payload.size()));
    write_all(prefix);
    write_all(payload);
    return id;
}

void StoreWriter::write_all(std::string_view bytes)
{
    buffer_.append(bytes);
    pos_ += bytes.size();
    if (buffer_.size() >= kWriteBufferSize) {
        flush_buffer();
    }
}

void StoreWriter::flush_buffer()
{
    std::size_t done = 0;
    while (done < buffer_.size()) {
        const ssize_t n = ::write(fd_, buffer_.data() + done, buffer_.size() - done);
        if (n < 0) {
            if (errno == EINTR) {
                continue;
            }
            throw_errno("write " + path_.string());
        }
        done += static_cast<std::size_t>(n);
    }
    buffer_.clear();
}

void StoreWriter::close()
{
    if (!is_open()) {
        return;
    }
    const std::uint64_t table_pos = pos_;
    std::string table;
    table.reserve(offsets_.size() * 8);
    for (auto off : offsets_) {
        put_le<std::uint64_t>(table, off);
    }
    const auto crc = crc32(std::as_bytes(std::span(table.data(), table.size())));
    write_all(table);
    std::string footer;
    put_le<std::uint32_t>(footer, crc);
    write_all(footer);
    flush_buffer();

    std::string patch;
    put_le<std::uint64_t>(patch, offsets_.size());
    put_le<std::uint64_t>(patch, table_pos);
    if (::pwrite(fd_, patch.data(), patch.size(), 8) != static_cast<ssize_t>(patch.size())) {
        const int fd = std::exchange(fd_, -1);
        ::close(fd);
        throw_errno("patch header of " + path_.string());
    }
    const int fd = std::exchange(fd_, -1);
    if (::close(fd) != 0) {
        throw_errno("close " + path_.string());
    }
}

// ---------------------------------------------------------------------------
// StoreReader

StoreReader::StoreReader(const std::filesystem::path &path, OpenOptions options) : file_(path)
{
    detail::ByteCursor cur(file_.bytes());
    try {
        const auto magic = cur.read_bytes(4);
        if (std::memcmp(magic.data(), kStoreMagic, 4) != 0) {
            throw FormatError("not a flexkit corpus store (bad magic): " + path.string());
        }
        const auto version = cur.read<std::uint32_t>();
        if (version != kStoreVersion) {
            throw FormatError("unsupported corpus store version " + std::to_string(version));
        }
        record_count_ = cur.read<std::uint64_t>();
        offset_table_pos_ = cur.read<std::uint64_t>();
        const auto nfields = cur.read<std::uint16_t>();
        for (std::uint16_t i = 0; i < nfields; ++i) {
            const auto len = cur.read<std::uint16_t>();
            schema_.emplace_back(cur.read_bytes(len));
        }
    } catch (const FormatError &e) {
        throw FormatError("corrupt corpus store header in " + path.string() + ": " + e.what());
    }
    records_begin_ = cur.pos();
    touch(0, records_begin_);

    if (schema_.empty()) {
        throw FormatError("corrupt corpus store header: empty schema");
    }
    const std::uint64_t expected_end = offset_table_pos_ + record_count_ * 8 + 4;
    if (offset_table_pos_ < records_begin_ || record_count_ > file_.size() / 8 || expected_end != file_.size()) {
        throw FormatError("corrupt corpus store " + path.string() +
                          ": offset table position does not match file size (unclosed or truncated store?)");
    }
    if (options.verify_checksum) {
        const auto table = file_.bytes().subspan(offset_table_pos_, record_count_ * 8);
        const auto stored = load_le<std::uint32_t>(file_.data() + offset_table_pos_ + record_count_ * 8);
        touch(offset_table_pos_, expected_end);
        if (crc32(table) != stored) {
            throw FormatError("corpus store offset table checksum mismatch: " + path.string());
        }
    }
    file_.advise_random();
}

bool StoreReader::has_field(std::string_view name) const noexcept
{
    return std::find(schema_.begin(), schema_.end(), name) != schema_.end();
}

std::uint32_t StoreReader::checksum() const noexcept
{
    return load_le<std::uint32_t>(file_.data() + offset_table_pos_ + record_count_ * 8);
}

void StoreReader::touch(std::uint64_t begin, std::uint64_t end) const noexcept
{
    if (end <= begin) {
        return;
    }
    const std::uint64_t first = begin / detail::kPageSize;
    const std::uint64_t last = (end - 1) / detail::kPageSize;
    touched_.fetch_add((last - first + 1) * detail::kPageSize, std::memory_order_relaxed);
}

std::uint64_t StoreReader::record_offset(DocId id) const
{
    if (id >= record_count_) {
        throw NotFound("doc id " + std::to_string(id) + " out of range (store has " + std::to_string(record_count_) +
                       " documents)");
    }
    const std::uint64_t entry = offset_table_pos_ + id * 8;
    touch(entry, entry + 8);
    return load_le<std::uint64_t>(file_.data() + entry);
}

std::string_view StoreReader::raw(DocId id) const
{
    const std::uint64_t off = record_offset(id);
    if (off < records_begin_ || off + 4 > offset_table_pos_) {
        throw FormatError("corrupt offset for doc " + std::to_string(id));
    }
    const auto len = load_le<std::uint32_t>(file_.data() + off);
    if (len > offset_table_pos_ - off - 4) {
        throw FormatError("truncated record for doc " + std::to_string(id) + ": length prefix exceeds file");
    }
    touch(off, off + 4 + len);
    return {reinterpret_cast<const char *>(file_.data() + off + 4), len};
}

Document StoreReader::get(DocId id) const { return deserialize_document(raw(id), id); }

void StoreReader::for_each(const std::function<void(const Document &)> &fn) const
{
    for (DocId i = 0; i < record_count_; ++i) {
        fn(get(i));
    }
}

// ---------------------------------------------------------------------------
// JSONL ingestion

Document document_from_json_line(std::string_view line, const std::vector<std::string> &schema)
{
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error &e) {
        throw FormatError(std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) {
        throw FormatError("corpus line must be a JSON object");
    }
    Document doc;
    for (const auto &[key, value] : j.items()) {
        if (key == "metadata") {
            doc.metadata = json_to_string_map(value, "metadata");
            continue;
        }
        if (std::find(schema.begin(), schema.end(), key) == schema.end()) {
            throw InvalidArgument("field '" + key + "' is not in the store schema");
        }
        if (!value.is_string()) {
            throw FormatError("field '" + key + "' must be a string");
        }
        doc.fields.emplace(key, value.get<std::string>());
    }
    return doc;
}

std::string document_to_json_line(const Document &doc)
{
    nlohmann::json j = nlohmann::json::object();
    for (const auto &[k, v] : doc.fields) {
        j[k] = v;
    }
    if (!doc.metadata.empty()) {
        j["metadata"] = doc.metadata;
    }
    return j.dump();
}

IngestStats ingest_jsonl(std::istream &in, StoreWriter &writer)
{
    IngestStats stats;
    std::string line;
    std::uint64_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            ++stats.skipped_blank_lines;
            continue;
        }
        try {
            writer.append(document_from_json_line(line, writer.schema()));
        } catch (const Error &e) {
            throw FormatError("corpus line " + std::to_string(lineno) + ": " + e.what());
        }
        ++stats.documents;
    }
    return stats;
}

} // namespace flexkit
