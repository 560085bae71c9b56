#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pfstab {

/// Failure category. The CLI writes this as the machine-readable `kind`
/// field of an error file.
enum class ErrorKind {
    Config,
    Usage,
    Numeric,
    Model,
    CorruptFile,
    Validation,
    Solver,
    DegenerateSolution,
    MissingArtifact,
    StaleArtifact,
    Io,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
    throw Error(kind, what);
}

}  // namespace pfstab
