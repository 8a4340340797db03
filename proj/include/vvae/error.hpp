#ifndef VVAE_ERROR_HPP
#define VVAE_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace vvae {

/// Root of every exception thrown by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration or command-line usage (CLI exit code 2).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A PersonaAssignment or schema broke one of its invariants.
class SchemaError : public Error {
public:
    using Error::Error;
};

class UnknownClosedValue : public Error {
public:
    UnknownClosedValue(std::string dim, std::string value)
        : Error("value '" + value + "' is not a member of closed dimension '" + dim + "'"),
          dim_(std::move(dim)), value_(std::move(value)) {}

    const std::string& dimension() const noexcept { return dim_; }
    const std::string& value() const noexcept { return value_; }

private:
    std::string dim_;
    std::string value_;
};

class TemplateError : public Error {
public:
    explicit TemplateError(std::string placeholder)
        : Error("missing binding for placeholder {" + placeholder + "}"),
          placeholder_(std::move(placeholder)) {}

    const std::string& placeholder() const noexcept { return placeholder_; }

private:
    std::string placeholder_;
};

class TransportError : public Error {
public:
    using Error::Error;
};

class ApiError : public Error {
public:
    ApiError(int status, std::string body)
        : Error("API returned status " + std::to_string(status) + ": " + body),
          status_(status), body_(std::move(body)) {}

    int status() const noexcept { return status_; }
    const std::string& body() const noexcept { return body_; }

private:
    int status_;
    std::string body_;
};

class CacheError : public Error {
public:
    using Error::Error;
};

class ExtractionError : public Error {
public:
    ExtractionError(const std::string& what, std::string raw_reply)
        : Error(what), raw_reply_(std::move(raw_reply)) {}

    const std::string& raw_reply() const noexcept { return raw_reply_; }

private:
    std::string raw_reply_;
};

class InvalidValue : public Error {
public:
    using Error::Error;
};

class SupportError : public Error {
public:
    using Error::Error;
};

/// Error tied to a line of a JSONL input (1-based line number).
class LineError : public Error {
public:
    LineError(const std::string& what, std::size_t line)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class IngestError : public LineError {
public:
    using LineError::LineError;
};

class EvalIngestError : public LineError {
public:
    using LineError::LineError;
};

class PairingError : public Error {
public:
    using Error::Error;
};

class BuildError : public Error {
public:
    using Error::Error;
};

class InfiniteNll : public Error {
public:
    InfiniteNll() : Error("marginal likelihood is zero; negative log-likelihood is infinite") {}
};

class InfiniteKl : public Error {
public:
    InfiniteKl() : Error("posterior puts mass where the prior is zero; KL is infinite") {}
};

class IoError : public Error {
public:
    IoError(const std::string& path, const std::string& what)
        : Error(path + ": " + what) {}
};

} // namespace vvae

#endif // VVAE_ERROR_HPP
