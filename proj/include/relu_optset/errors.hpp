#pragma once

#include <stdexcept>
#include <string>

namespace relu_optset {

// Failure classes. The CLI maps these onto exit codes.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct InputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ParseError : InputError {
  using InputError::InputError;
};

// The requested mode would exceed a documented size guard.
struct CapabilityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A primal point could not be certified (no dual multiplier fits it).
struct CertificateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MappingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace relu_optset
