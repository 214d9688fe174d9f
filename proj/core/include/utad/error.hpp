#pragma once

#include <stdexcept>
#include <string>

namespace utad {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input violates an operation's precondition (bad value, wrong range, unknown label).
class InvalidInput : public Error {
public:
    using Error::Error;
};

/// Two arrays that must agree in shape do not.
class ShapeMismatch : public InvalidInput {
public:
    using InvalidInput::InvalidInput;
};

/// Reading a volume, manifest or dataset from disk failed.
class IngestionError : public Error {
public:
    using Error::Error;
};

/// Checkpoint container is unreadable, from another format version, or incompatible.
class CheckpointError : public Error {
public:
    using Error::Error;
};

/// A training loss became NaN or infinite.
class NonFiniteLoss : public Error {
public:
    NonFiniteLoss(const std::string& term, double value)
        : Error("non-finite loss term '" + term + "' = " + std::to_string(value)), term_(term) {}

    const std::string& term() const noexcept { return term_; }

private:
    std::string term_;
};

/// A metric is undefined for its inputs (e.g. surface distance of an empty mask).
class UndefinedMetric : public Error {
public:
    using Error::Error;
};

}  // namespace utad
