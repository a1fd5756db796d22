#pragma once

#include <stdexcept>
#include <string>

namespace diaglab {

// Malformed input: system documents, CLI arguments, shape mismatches.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A well-formed request that cannot be honoured: overflow, memory cap,
// enumeration guard, quadrature budget, violated preconditions.
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace diaglab
