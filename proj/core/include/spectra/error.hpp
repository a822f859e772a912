#pragma once

#include <stdexcept>
#include <string>

namespace spectra {

// Error categories map onto process exit codes: config/usage problems exit 2,
// numeric failures exit 1.
enum class ErrorKind {
    config,   // bad flags, bad config keys, precondition violations
    io,       // missing/unwritable files
    format,   // bad magic, truncated or corrupt payloads
    numeric,  // NaN/Inf, tolerance failures
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail_config(const std::string& msg) { throw Error(ErrorKind::config, msg); }
[[noreturn]] inline void fail_io(const std::string& msg) { throw Error(ErrorKind::io, msg); }
[[noreturn]] inline void fail_format(const std::string& msg) { throw Error(ErrorKind::format, msg); }
[[noreturn]] inline void fail_numeric(const std::string& msg) { throw Error(ErrorKind::numeric, msg); }

}  // namespace spectra
