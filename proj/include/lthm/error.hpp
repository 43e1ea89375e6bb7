#pragma once

#include <stdexcept>
#include <string>

namespace lthm {

// Input files or records that fail validation.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite objectives, zero-likelihood tokens, violated EM invariants.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace lthm
