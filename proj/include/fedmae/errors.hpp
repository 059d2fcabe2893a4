#pragma once

#include <stdexcept>
#include <string>

namespace fedmae {

// Vector length disagreement between operands.
struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// NaN/Inf surfaced in a value that must stay finite.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad run configuration (file contents or CLI arguments).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Base for all wire-protocol failures.
struct ProtocolError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ChecksumError : ProtocolError {
    using ProtocolError::ProtocolError;
};

struct TruncatedMessageError : ProtocolError {
    using ProtocolError::ProtocolError;
};

struct VersionMismatchError : ProtocolError {
    using ProtocolError::ProtocolError;
};

// Checkpoint file failures, kept distinct so callers can tell a stale
// format from a corrupted file.
struct CheckpointFormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CheckpointVersionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CheckpointChecksumError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NotFoundError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace fedmae
