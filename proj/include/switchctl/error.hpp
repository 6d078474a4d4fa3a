#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace switchctl {

enum class ErrorKind {
  InvalidArgument,
  SingleRegime,
  DegenerateEllipticity,
  NegativeCost,
  NonpositiveDiscount,
  NotValidated,
  OutOfDomain,
  LinearSolveFailure,
  NoConvergence,
  LadderStall,
  ChatterGuard,
  InadmissibleJump,
  ConfigError,
};

std::string_view to_string(ErrorKind kind);

/// Exception carrying a machine-readable kind alongside the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace switchctl
