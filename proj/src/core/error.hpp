#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace stabkit {

// Numeric values are part of the C ABI (see stabkit.h); append only.
enum class ErrorCode : int {
  Ok = 0,
  Syntax = 1,
  UnknownIdentifier = 2,
  Arity = 3,
  Dimension = 4,
  Domain = 5,
  FiniteEscape = 6,
  StepsExhausted = 7,
  StepUnderflow = 8,
  NoCrossing = 9,
  Tangential = 10,
  GradientSingular = 11,
  NonConvergence = 12,
  Precondition = 13,
  Residual = 14,
  Config = 15,
  InvalidArgument = 16,
  EndpointMismatch = 17,
  Internal = 99,
};

const char* error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Parse failures carry the byte offset into the source text.
class ParseError : public Error {
 public:
  ParseError(ErrorCode code, std::size_t offset, const std::string& what)
      : Error(code, what + " at byte " + std::to_string(offset)), offset_(offset), detail_(what) {}
  std::size_t offset() const noexcept { return offset_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::size_t offset_;
  std::string detail_;
};

// Flow failures remember where the trajectory was when integration stopped.
class FlowError : public Error {
 public:
  FlowError(ErrorCode code, const std::string& what, double time, std::vector<double> state)
      : Error(code, what), time_(time), state_(std::move(state)) {}
  double time() const noexcept { return time_; }
  const std::vector<double>& state() const noexcept { return state_; }

 private:
  double time_;
  std::vector<double> state_;
};

}  // namespace stabkit
