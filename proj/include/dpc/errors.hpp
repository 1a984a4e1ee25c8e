#pragma once

#include <stdexcept>
#include <string>

namespace dpc {

/// Malformed or out-of-contract argument (dimensions, non-finite values, bad masses).
class InputError : public std::invalid_argument {
 public:
  explicit InputError(const std::string& what) : std::invalid_argument(what) {}
};

/// Constraint polytope admits no point.
class InfeasibleError : public std::runtime_error {
 public:
  explicit InfeasibleError(const std::string& what) : std::runtime_error(what) {}
};

/// Problem too large for an exact path; the caller is expected to subsample.
class SizeError : public std::length_error {
 public:
  explicit SizeError(const std::string& what) : std::length_error(what) {}
};

/// Remaining reference mass cannot satisfy the requested demand.
class Exhausted : public std::runtime_error {
 public:
  explicit Exhausted(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace dpc
