#pragma once

#include <stdexcept>
#include <string>

namespace twophase {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidInput : Error {
  using Error::Error;
};
struct NonConvergence : Error {
  using Error::Error;
};
struct SingularDesign : Error {
  using Error::Error;
};
// calibration solve failed; still a NonConvergence, catchable on its own
struct RakeNonConvergence : NonConvergence {
  using NonConvergence::NonConvergence;
};
struct CollinearAuxiliaries : Error {
  using Error::Error;
};
struct DegenerateVariance : Error {
  using Error::Error;
};
struct EmptySource : Error {
  using Error::Error;
};
struct DimensionMismatch : Error {
  using Error::Error;
};
struct EmptySupport : Error {
  using Error::Error;
};
struct InsufficientControls : Error {
  using Error::Error;
};
struct SchemaError : Error {
  using Error::Error;
};
struct ParseError : Error {
  ParseError(const std::string& msg, long line)
      : Error(msg + " (line " + std::to_string(line) + ")"), line_number(line) {}
  long line_number;
};
struct IoError : Error {
  using Error::Error;
};

}  // namespace twophase
