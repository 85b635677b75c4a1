#pragma once

#include <stdexcept>
#include <string>

namespace vsegan {

// Violated precondition or shape contract. Maps to CLI exit code 3.
class ContractViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Corrupted or incompatible persisted data (checkpoints, manifests). Exit code 4.
class IntegrityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A forward or backward op, or an optimizer step, produced NaN/Inf.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw ContractViolation(what);
}

}  // namespace vsegan
