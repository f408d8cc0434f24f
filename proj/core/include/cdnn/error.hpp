#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cdnn {

enum class ErrorCode {
  shape,
  symmetry,
  dimension_mismatch,
  insufficient_data,
  degenerate_covariance,
  non_finite,
  unknown_family,
  generation_failed,
  nonstationary,
  overflow,
  invalid_probability,
  infeasible_target,
  invalid_permutation,
  invalid_argument,
  invalid_config,
  parse,
  io,
  training_diverged,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Single exception type for every library failure; `code()` tells callers
/// which contract was violated.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace cdnn
