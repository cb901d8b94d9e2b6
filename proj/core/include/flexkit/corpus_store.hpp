#pragma once

// Append-once document store with memory-mapped random access.
//
// Layout (little-endian):
//   "FCS1" | version u32 | record_count u64 | offset_table_pos u64
//   | schema: u16 count, then per name u16 len + UTF-8 bytes
//   | records: u32 len + canonical JSON payload, repeated
//   | offset table: record_count x u64 (absolute offset of each length prefix)
//   | crc32 u32 of the offset table

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "flexkit/mapped_file.hpp"

namespace flexkit {

using DocId = std::uint64_t;

struct Document {
    DocId doc_id = 0;
    std::map<std::string, std::string> fields;
    std::map<std::string, std::string> metadata;

    /// Non-empty fields joined by newlines, in field-name order.
    [[nodiscard]] std::string joined_text() const;

    friend bool operator==(const Document &, const Document &) = default;
};

/// Canonical payload: sorted-key compact JSON {"fields":{...},"metadata":{...}}.
/// doc_id is positional and not part of the payload.
[[nodiscard]] std::string serialize_document(const Document &doc);
[[nodiscard]] Document deserialize_document(std::string_view payload, DocId doc_id = 0);

inline constexpr char kStoreMagic[4] = {'F', 'C', 'S', '1'};
inline constexpr std::uint32_t kStoreVersion = 1;

struct CreateOptions {
    bool overwrite = false;
};

class StoreWriter {
public:
    static StoreWriter create(const std::filesystem::path &path, std::vector<std::string> schema,
                              CreateOptions options = {});

    StoreWriter(StoreWriter &&other) noexcept;
    StoreWriter &operator=(StoreWriter &&other) noexcept;
    StoreWriter(const StoreWriter &) = delete;
    StoreWriter &operator=(const StoreWriter &) = delete;
    ~StoreWriter();

    /// Appends a document and returns its id. The document's own doc_id is ignored.
    DocId append(const Document &doc);

    /// Writes the offset table and footer and patches the header. Idempotent.
    void close();

    [[nodiscard]] bool is_open() const noexcept { return fd_ >= 0; }
    [[nodiscard]] std::uint64_t size() const noexcept { return offsets_.size(); }
    [[nodiscard]] const std::vector<std::string> &schema() const noexcept { return schema_; }

private:
    StoreWriter(int fd, std::filesystem::path path, std::vector<std::string> schema);
    void write_all(std::string_view bytes);
    void flush_buffer();

    int fd_ = -1;
    std::filesystem::path path_;
    std::vector<std::string> schema_;
    std::vector<std::uint64_t> offsets_;
    std::uint64_t pos_ = 0;
    std::string buffer_;
};

struct OpenOptions {
    /// Validate the offset-table CRC on open. Touches the offset table once.
    bool verify_checksum = true;
};

class StoreReader {
public:
    explicit StoreReader(const std::filesystem::path &path, OpenOptions options = {});

    StoreReader(StoreReader &&) = delete;
    StoreReader &operator=(StoreReader &&) = delete;

    [[nodiscard]] std::uint64_t size() const noexcept { return record_count_; }
    [[nodiscard]] const std::vector<std::string> &schema() const noexcept { return schema_; }
    [[nodiscard]] bool has_field(std::string_view name) const noexcept;
    [[nodiscard]] const std::filesystem::path &path() const noexcept { return file_.path(); }
    [[nodiscard]] std::uint64_t file_size() const noexcept { return file_.size(); }
    /// CRC32 of the offset table as stored in the footer.
    [[nodiscard]] std::uint32_t checksum() const noexcept;

    [[nodiscard]] Document get(DocId id) const;
    /// Payload bytes of one record, viewed in place in the mapping.
    [[nodiscard]] std::string_view raw(DocId id) const;
    [[nodiscard]] std::uint64_t record_offset(DocId id) const;

    void for_each(const std::function<void(const Document &)> &fn) const;

    /// Bytes of mapped pages touched through this reader (header, offset entries, records).
    [[nodiscard]] std::uint64_t bytes_touched() const noexcept { return touched_.load(std::memory_order_relaxed); }
    void reset_bytes_touched() noexcept { touched_.store(0, std::memory_order_relaxed); }

private:
    void touch(std::uint64_t begin, std::uint64_t end) const noexcept;

    MappedFile file_;
    std::vector<std::string> schema_;
    std::uint64_t record_count_ = 0;
    std::uint64_t offset_table_pos_ = 0;
    std::uint64_t records_begin_ = 0;
    mutable std::atomic<std::uint64_t> touched_{0};
};

struct IngestStats {
    std::uint64_t documents = 0;
    std::uint64_t skipped_blank_lines = 0;
};

/// Reads line-delimited JSON (schema fields plus optional "metadata") into a writer.
IngestStats ingest_jsonl(std::istream &in, StoreWriter &writer);

/// Inverse of document_from_json_line: fields at top level, metadata under "metadata" when present.
[[nodiscard]] std::string document_to_json_line(const Document &doc);

/// Parses one JSONL corpus line into a document, validating keys against the schema.
[[nodiscard]] Document document_from_json_line(std::string_view line, const std::vector<std::string> &schema);

} // namespace flexkit
