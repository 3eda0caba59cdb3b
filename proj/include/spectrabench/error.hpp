#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace spectrabench {

enum class ErrorKind {
    parse,
    schema,
    label,
    integrity,
    capacity,
    domain,
    degenerate,
    shape,
    unsupported,
    config,
};

const char* to_string(ErrorKind kind);

/// Base of every error thrown by the library. The kind decides the CLI exit code.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

    /// True for errors caused by the input data (as opposed to configuration or bugs).
    bool is_data_error() const noexcept {
        return kind_ != ErrorKind::config && kind_ != ErrorKind::unsupported;
    }

private:
    ErrorKind kind_;
};

template <ErrorKind K>
class KindError : public Error {
public:
    explicit KindError(const std::string& what) : Error(K, what) {}
};

using SchemaError = KindError<ErrorKind::schema>;
using LabelError = KindError<ErrorKind::label>;
using IntegrityError = KindError<ErrorKind::integrity>;
using CapacityError = KindError<ErrorKind::capacity>;
using DomainError = KindError<ErrorKind::domain>;
using DegenerateError = KindError<ErrorKind::degenerate>;
using ShapeError = KindError<ErrorKind::shape>;
using UnsupportedError = KindError<ErrorKind::unsupported>;
using ConfigError = KindError<ErrorKind::config>;

/// Malformed input text. Carries the 1-based data row when known (0 = header).
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::optional<std::size_t> row = std::nullopt)
        : Error(ErrorKind::parse,
                row ? "row " + std::to_string(*row) + ": " + what : what),
          row_(row) {}

    std::optional<std::size_t> row() const noexcept { return row_; }

private:
    std::optional<std::size_t> row_;
};

}  // namespace spectrabench
