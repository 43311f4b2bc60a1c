#pragma once

// Shared vocabulary: representations, error types, small helpers.

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace georep {

// Ordering Euclidean < Coordinate < Vector is used for every deterministic
// iteration in the library.
enum class Representation : std::uint8_t { Euclidean = 0, Coordinate = 1, Vector = 2 };

inline constexpr std::array<Representation, 3> kRepresentations = {
    Representation::Euclidean, Representation::Coordinate, Representation::Vector};

inline constexpr std::size_t index_of(Representation r) { return static_cast<std::size_t>(r); }

// Lower-case key used in dataset files, run records and HTTP payloads.
inline std::string_view to_key(Representation r) {
    switch (r) {
        case Representation::Euclidean: return "euclidean";
        case Representation::Coordinate: return "coordinate";
        case Representation::Vector: return "vector";
    }
    return "?";
}

// Short column label used in report tables.
inline std::string_view to_label(Representation r) {
    switch (r) {
        case Representation::Euclidean: return "Euclid";
        case Representation::Coordinate: return "Coord";
        case Representation::Vector: return "Vector";
    }
    return "?";
}

inline char to_letter(Representation r) {
    switch (r) {
        case Representation::Euclidean: return 'E';
        case Representation::Coordinate: return 'C';
        case Representation::Vector: return 'V';
    }
    return '?';
}

inline std::optional<Representation> representation_from_key(std::string_view key) {
    if (key == "euclidean" || key == "E" || key == "euc") return Representation::Euclidean;
    if (key == "coordinate" || key == "C" || key == "coord") return Representation::Coordinate;
    if (key == "vector" || key == "V" || key == "vec") return Representation::Vector;
    return std::nullopt;
}

// ─── Errors ─────────────────────────────────────────────────────────────
// Every failure the library raises derives from georep::Error so the CLI can
// catch one type and map it to an exit code.

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IOError : public Error {
public:
    using Error::Error;
};

class SchemaError : public Error {
public:
    SchemaError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class DuplicateIdError : public Error {
public:
    explicit DuplicateIdError(std::string id)
        : Error("duplicate problem id \"" + id + "\""), id_(std::move(id)) {}
    const std::string& id() const noexcept { return id_; }

private:
    std::string id_;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(std::size_t offset, const std::string& what)
        : Error("offset " + std::to_string(offset) + ": " + what), offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class MissingVariant : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class DatasetMismatch : public Error {
public:
    using Error::Error;
};

class UnknownEntry : public Error {
public:
    using Error::Error;
};

class EmptyMatrix : public Error {
public:
    EmptyMatrix() : Error("correctness matrix has no scored rows") {}
};

class RankDeficient : public Error {
public:
    using Error::Error;
};

class SeparationDetected : public Error {
public:
    using Error::Error;
};

class UnsupportedFormat : public Error {
public:
    using Error::Error;
};

class DisjointRuns : public Error {
public:
    using Error::Error;
};

}  // namespace georep
