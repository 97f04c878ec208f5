#pragma once

#include <stdexcept>
#include <string>

namespace gbs {

// Bad arguments or malformed input data.
class InputError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

// Non-finite values appearing in numeric state.
class NumericError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Linear system could not be solved (singular matrix).
class SolverError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// A caller broke an ordering contract between pipeline stages.
class ContractError : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

class ParseError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Well-formed input whose contents are inconsistent (dangling references,
// duplicate ids).
class ValidationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace gbs
