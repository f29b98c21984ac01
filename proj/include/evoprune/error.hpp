#pragma once

#include <stdexcept>
#include <string>

namespace evoprune {

// Malformed IDX stream: bad magic, short header.
class FormatError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Declared element count disagrees with the bytes actually present.
class TruncationError : public FormatError {
  using FormatError::FormatError;
};

// Value outside its domain, e.g. a label byte above 9.
class DomainError : public std::domain_error {
  using std::domain_error::domain_error;
};

// Non-finite loss or activation during a training step.
class NumericError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Caller broke a precondition (shape mismatch, out-of-range argument).
class ContractViolation : public std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Total population mass reached zero; the weighted mean fitness is undefined.
class DegeneratePopulation : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class CheckpointError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace evoprune
