#pragma once

#include <stdexcept>
#include <string>

namespace wbsgd {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An iterative method hit its iteration cap before meeting its tolerance.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// Matrix lacks full column rank (smallest singular value below 1e-10 of largest).
class RankDeficientError : public Error {
 public:
  using Error::Error;
};

}  // namespace wbsgd
