#pragma once

#include <stdexcept>
#include <string>

namespace pinf {

/// Failure category; the CLI maps these to process exit codes.
enum class ErrorKind {
    Usage = 1,    ///< bad configuration or arguments
    Data = 2,     ///< malformed inputs, files, or shapes
    Numeric = 3,  ///< solver or optimizer failure
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline Error usage_error(const std::string& what) { return Error(ErrorKind::Usage, what); }
inline Error data_error(const std::string& what) { return Error(ErrorKind::Data, what); }
inline Error numeric_error(const std::string& what) { return Error(ErrorKind::Numeric, what); }

}  // namespace pinf
