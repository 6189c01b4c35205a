#pragma once

#include <stdexcept>
#include <string>

namespace somiap {

/// Base of every error thrown by the library. `kind()` is a stable short tag
/// used by the CLI to choose an exit code.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

/// Malformed image stream. The message names the failing format stage.
class DecodeError : public Error {
public:
    explicit DecodeError(const std::string& what) : Error("decode", what) {}
};

/// Filesystem or network failure.
class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error("io", what) {}
};

/// A precondition of an operation was violated by the caller.
class ContractError : public Error {
public:
    explicit ContractError(const std::string& what) : Error("contract", what) {}
};

class BoundsError : public Error {
public:
    explicit BoundsError(const std::string& what) : Error("bounds", what) {}
};

class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& what) : Error("shape", what) {}
};

class SingularityError : public Error {
public:
    explicit SingularityError(const std::string& what) : Error("singular", what) {}
};

/// Syntactically or structurally invalid model/manifest document.
class ParseError : public Error {
public:
    explicit ParseError(const std::string& what) : Error("parse", what) {}
};

/// Well-formed model of a kind this library does not evaluate.
class UnsupportedModelError : public Error {
public:
    explicit UnsupportedModelError(const std::string& what) : Error("unsupported", what) {}
};

/// Duplicate identifier on insert.
class ConflictError : public Error {
public:
    explicit ConflictError(const std::string& what) : Error("conflict", what) {}
};

}  // namespace somiap
