#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rewts {

/// Category attached to every error raised by the library. The CLI reports
/// it verbatim in its machine-readable error document.
enum class ErrorKind {
    Schema,
    Ordering,
    EmptyInput,
    Parameter,
    Index,
    Shape,
    InsufficientData,
    Numeric,
    Convergence,
    Coverage,
    Comparison,
    Config,
    Io,
};

std::string_view to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool ok, ErrorKind kind, const std::string& what) {
    if (!ok) throw Error(kind, what);
}

}  // namespace rewts
