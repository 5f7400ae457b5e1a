#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rumi {

// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Bad argument value (non-positive factor, T < 2 in windowing, ...).
class ParamError : public Error {
public:
    using Error::Error;
};

// Dimension mismatch between tensors, frames or vectors.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Rectangle or index outside the valid range.
class BoundsError : public Error {
public:
    using Error::Error;
};

// Clip too short to define any ranking pair (T < 2).
class DegenerateClipError : public Error {
public:
    using Error::Error;
};

// Non-finite value encountered (overflow, NaN gradient, ...).
class NumericError : public Error {
public:
    using Error::Error;
};

// Operation called with stale or missing cached state.
class StateError : public Error {
public:
    using Error::Error;
};

// Dataset-level problem (empty split, missing entries, ...).
class DataError : public Error {
public:
    using Error::Error;
};

// A class has too few members to stratify a split.
class StratificationError : public Error {
public:
    using Error::Error;
};

// Filesystem problem; message names the offending path.
class IoError : public Error {
public:
    using Error::Error;
};

// Pipeline configuration rejected before any work started.
class ValidationError : public Error {
public:
    using Error::Error;
};

// Malformed or truncated image payload; carries the byte offset at which
// parsing stopped.
class DecodeError : public Error {
public:
    DecodeError(const std::string& what, std::size_t byte_offset)
        : Error(what + " (at byte " + std::to_string(byte_offset) + ")"),
          offset_(byte_offset) {}

    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

}  // namespace rumi
