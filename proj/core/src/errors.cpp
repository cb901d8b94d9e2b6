#include "flexkit/errors.hpp"

#include <cerrno>
#include <cstring>

namespace flexkit {

void throw_errno(const std::string &what)
{
    const int err = errno;
    throw IoError(what + ": " + std::strerror(err));
}

} // namespace flexkit
