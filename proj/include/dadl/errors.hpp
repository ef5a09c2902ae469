#pragma once

#include <stdexcept>
#include <string>

namespace dadl {

/// Violated call contract: bad dimensions, broken invariants, out-of-range arguments.
class ContractError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Out-of-range or inconsistent parameter values.
class ParameterError : public ContractError {
public:
  using ContractError::ContractError;
};

/// Bad configuration input: unreadable files, malformed JSON, unknown keys.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Numerical failure: factorization breakdown, singular system, non-convergence.
class SolverError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace dadl
