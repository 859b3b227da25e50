#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace frames {

// Base of every error raised by the pipeline. `kind()` is a stable,
// machine-parsable tag used by the CLI and the HTTP layer.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(message), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

#define FRAMES_DEFINE_ERROR(Name, tag)                                   \
    class Name : public Error {                                          \
    public:                                                              \
        explicit Name(const std::string& message) : Error(tag, message) {} \
    };

FRAMES_DEFINE_ERROR(EncodingError, "encoding")
FRAMES_DEFINE_ERROR(IngestionError, "ingestion")
FRAMES_DEFINE_ERROR(SamplingError, "sampling")
FRAMES_DEFINE_ERROR(InputError, "input")
FRAMES_DEFINE_ERROR(DegenerateAgreementError, "degenerate_agreement")
FRAMES_DEFINE_ERROR(SessionError, "session")
FRAMES_DEFINE_ERROR(SequencingError, "sequencing")
FRAMES_DEFINE_ERROR(ConflictError, "conflict")
FRAMES_DEFINE_ERROR(EnvironmentError, "environment")
FRAMES_DEFINE_ERROR(OutputConflictError, "output_conflict")
FRAMES_DEFINE_ERROR(DataError, "data")
FRAMES_DEFINE_ERROR(LoadError, "load")
FRAMES_DEFINE_ERROR(LeakageError, "leakage")
FRAMES_DEFINE_ERROR(IoError, "io")

#undef FRAMES_DEFINE_ERROR

// Raised when a file line cannot be parsed; carries the 1-based line number.
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& message)
        : Error("parse", "line " + std::to_string(line) + ": " + message), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// A record or label set broke one or more domain rules.
class ValidationError : public Error {
public:
    ValidationError(const std::string& message, std::vector<std::string> violations)
        : Error("validation", message), violations_(std::move(violations)) {}

    const std::vector<std::string>& violations() const noexcept { return violations_; }

private:
    std::vector<std::string> violations_;
};

class TranslationError : public Error {
public:
    TranslationError(std::string doc_id, const std::string& reason)
        : Error("translation", "document '" + doc_id + "': " + reason),
          doc_id_(std::move(doc_id)) {}

    const std::string& doc_id() const noexcept { return doc_id_; }

private:
    std::string doc_id_;
};

}  // namespace frames
