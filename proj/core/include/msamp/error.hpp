#pragma once

#include <stdexcept>
#include <string>

namespace msamp {

// Invalid input: bad spec, out-of-range arguments, precondition violations.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Numerical failure: non-convergence, singular solves, non-finite iterates.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace msamp
