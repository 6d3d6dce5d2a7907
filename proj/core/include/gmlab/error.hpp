#pragma once

#include <stdexcept>
#include <string>

namespace gmlab {

// Violated precondition or shape contract.
struct ContractError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Non-finite value produced by a numeric operation.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// File or stream failure.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace gmlab
