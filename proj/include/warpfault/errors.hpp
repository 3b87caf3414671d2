#pragma once

#include <stdexcept>
#include <string>

namespace warpfault {

// Caller broke a documented precondition (bad dimensions, malformed payload, ...).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Fault site does not exist in the kernel trace it was aimed at.
class InvalidSite : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Site sampling was asked to pick from an empty population.
class NoSites : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// User-supplied configuration or file content is unusable.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A campaign log was written by an incompatible tool version.
class IncompatibleLog : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& what) {
  if (!condition) throw ContractViolation(what);
}

}  // namespace warpfault
