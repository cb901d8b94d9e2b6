#include "flexkit/mapped_file.hpp"

#include "flexkit/errors.hpp"

#include <fcntl.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>

#include <utility>

namespace flexkit {

MappedFile::MappedFile(const std::filesystem::path &path) : path_(path)
{
    const int fd = ::open(path.c_str(), O_RDONLY | O_CLOEXEC);
    if (fd < 0) {
        throw_errno("open " + path.string());
    }
    struct stat st {};
    if (::fstat(fd, &st) != 0) {
        ::close(fd);
        throw_errno("fstat " + path.string());
    }
    size_ = static_cast<std::size_t>(st.st_size);
    if (size_ > 0) {
        void *addr = ::mmap(nullptr, size_, PROT_READ, MAP_SHARED, fd, 0);
        if (addr == MAP_FAILED) {
            ::close(fd);
            throw_errno("mmap " + path.string());
        }
        data_ = static_cast<const std::byte *>(addr);
    }
    // The mapping keeps the file referenced.
    ::close(fd);
}

MappedFile::~MappedFile() { release(); }

MappedFile::MappedFile(MappedFile &&other) noexcept
    : path_(std::move(other.path_)),
      data_(std::exchange(other.data_, nullptr)),
      size_(std::exchange(other.size_, 0))
{
}

MappedFile &MappedFile::operator=(MappedFile &&other) noexcept
{
    if (this != &other) {
        release();
        path_ = std::move(other.path_);
        data_ = std::exchange(other.data_, nullptr);
        size_ = std::exchange(other.size_, 0);
    }
    return *this;
}

void MappedFile::advise_random() const noexcept
{
    if (data_ != nullptr) {
        ::madvise(const_cast<std::byte *>(data_), size_, MADV_RANDOM);
    }
}

void MappedFile::release() noexcept
{
    if (data_ != nullptr) {
        ::munmap(const_cast<std::byte *>(data_), size_);
        data_ = nullptr;
        size_ = 0;
    }
}

} // namespace flexkit
