#pragma once

// Shared error types and small utilities used across the library.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pathwatch {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Problems caused by input data or configuration (CLI exit code 2).
class DataError : public Error {
public:
    using Error::Error;
};

class MissingColumnError : public DataError {
public:
    explicit MissingColumnError(const std::string& column)
        : DataError("missing column: " + column), column_(column) {}
    const std::string& column() const { return column_; }

private:
    std::string column_;
};

class MalformedRowError : public DataError {
public:
    MalformedRowError(std::size_t line, const std::string& reason)
        : DataError("line " + std::to_string(line) + ": " + reason), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

class InvalidCountError : public DataError {
public:
    using DataError::DataError;
};

class DegenerateSplitError : public DataError {
public:
    using DataError::DataError;
};

class UnsortedInputError : public DataError {
public:
    using DataError::DataError;
};

class EmptyInputError : public DataError {
public:
    using DataError::DataError;
};

class SchemaMismatchError : public DataError {
public:
    using DataError::DataError;
};

class SingleClassError : public DataError {
public:
    using DataError::DataError;
};

class TooFewPerClassError : public DataError {
public:
    using DataError::DataError;
};

class AllZeroDifferencesError : public DataError {
public:
    using DataError::DataError;
};

class InvalidConfigError : public DataError {
public:
    using DataError::DataError;
};

class EmptySpaceError : public DataError {
public:
    using DataError::DataError;
};

/// Model container problems.
class VersionMismatchError : public DataError {
public:
    using DataError::DataError;
};

class CorruptEncodingError : public DataError {
public:
    using DataError::DataError;
};

// ---------------------------------------------------------------------------
// Deterministic RNG stream derivation
// ---------------------------------------------------------------------------

/// splitmix64 finalizer; good avalanche for deriving child seeds.
std::uint64_t mix64(std::uint64_t x);

/// Derive an independent stream seed from a base seed and a stream index.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    return mix64(seed + 0x9e3779b97f4a7c15ULL * (stream + 1));
}

/// FNV-1a over a list of strings; used for schema fingerprints.
std::uint64_t fingerprint(const std::vector<std::string>& parts);

// ---------------------------------------------------------------------------
// Parallelism
// ---------------------------------------------------------------------------

/// Cap on worker threads used by parallel_for (default: hardware concurrency).
void set_max_jobs(int jobs);
int max_jobs();

/// Run fn(i) for i in [0, n). Tasks must write only to disjoint state;
/// results are then independent of the thread count, keeping outputs
/// bit-reproducible for any --jobs value.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

// ---------------------------------------------------------------------------
// Filesystem helpers
// ---------------------------------------------------------------------------

/// Write contents to path via a temp file + rename so readers never observe
/// a partial file.
void atomic_write_file(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);

/// Shortest round-trippable decimal form of a double (std::to_chars).
std::string format_double(double value);

}  // namespace pathwatch
