#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string_view>

namespace flexkit {

/// Read-only memory mapping of a whole file. Move-only.
class MappedFile {
public:
    MappedFile() = default;
    explicit MappedFile(const std::filesystem::path &path);
    ~MappedFile();

    MappedFile(const MappedFile &) = delete;
    MappedFile &operator=(const MappedFile &) = delete;
    MappedFile(MappedFile &&other) noexcept;
    MappedFile &operator=(MappedFile &&other) noexcept;

    [[nodiscard]] std::span<const std::byte> bytes() const noexcept { return {data_, size_}; }
    [[nodiscard]] const std::byte *data() const noexcept { return data_; }
    [[nodiscard]] std::size_t size() const noexcept { return size_; }
    [[nodiscard]] bool empty() const noexcept { return size_ == 0; }
    [[nodiscard]] const std::filesystem::path &path() const noexcept { return path_; }

    /// Hint the kernel that access will be random (disables aggressive readahead).
    void advise_random() const noexcept;

private:
    void release() noexcept;

    std::filesystem::path path_;
    const std::byte *data_ = nullptr;
    std::size_t size_ = 0;
};

} // namespace flexkit
