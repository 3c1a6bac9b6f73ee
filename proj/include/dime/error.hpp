#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dime {

// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Constant vector where variation is required, zero vector where a
// direction is required, or empty input.
class DegenerateInputError : public Error {
public:
    using Error::Error;
};

// Ratings matrix with no pairable values.
class InsufficientDataError : public Error {
public:
    using Error::Error;
};

// Normal equations not positive definite (lambda = 0 on a rank-deficient
// design).
class SingularSystemError : public Error {
public:
    using Error::Error;
};

// Caller broke an operation precondition.
class InvalidArgumentError : public Error {
public:
    using Error::Error;
};

// Model evaluation failure. batch_index() is the position, within the
// submitted batch, of the first pair that could not be evaluated.
class GatewayError : public Error {
public:
    GatewayError(const std::string& what, std::size_t batch_index)
        : Error(what), batch_index_(batch_index) {}

    std::size_t batch_index() const noexcept { return batch_index_; }

private:
    std::size_t batch_index_ = 0;
};

// External-model wire protocol violation: bad handshake, schema mismatch,
// out-of-order response.
class ProtocolError : public Error {
public:
    using Error::Error;
};

// Training diverged (non-finite loss).
class TrainingError : public Error {
public:
    using Error::Error;
};

}  // namespace dime
