#pragma once

#include <stdexcept>
#include <string>

namespace crn {

// Shape or extent mismatch between operands.
struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// A documented precondition of an operation was violated.
struct ContractError : std::logic_error {
    using std::logic_error::logic_error;
};

// Malformed text input (clouds, configs, manifests).
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Value is syntactically fine but not admissible (NaN, out of range).
struct ValueError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Binary checkpoint does not match the expected layout.
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace crn
