#ifndef NEVO_ERRORS_HPP
#define NEVO_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace nevo {

// Malformed or inconsistent input data: IDX files, genome archives, configs.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Wire-level failures: bad frames, version mismatch, truncation, handshake.
class ProtocolError : public std::runtime_error {
public:
    explicit ProtocolError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace nevo

#endif
