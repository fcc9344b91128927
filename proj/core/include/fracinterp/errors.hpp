#pragma once

#include <stdexcept>
#include <string>

namespace fracinterp {

/// Malformed input: domains, plans, meshes, exponents, configuration.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A query outside an operation's domain of definition (e.g. a point that
/// is not in the open interior).
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numerical procedure failed (singular system, non-convergent iteration).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fracinterp
