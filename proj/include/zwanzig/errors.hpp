#pragma once

#include <stdexcept>
#include <string>

namespace zwanzig {

struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Bad labels, malformed bases or partitions, mismatched spaces.
struct InvalidArgument : Error {
    using Error::Error;
};

// Total dimension or superoperator size beyond the configured cap.
struct DimensionError : Error {
    using Error::Error;
};

// A constructed value failed its declared invariants.
struct InvariantViolation : Error {
    using Error::Error;
};

// A nonlinear Zwanzig projection was handed to machinery that requires a
// superoperator representation (memory kernels, master equations).
struct LinearityError : Error {
    using Error::Error;
};

// Runtime numerical guard tripped (trace drift, positivity breach, singular solve).
struct NumericGuard : Error {
    using Error::Error;
};

} // namespace zwanzig
