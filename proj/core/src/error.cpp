#include "cdnn/error.hpp"

namespace cdnn {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::shape: return "shape";
    case ErrorCode::symmetry: return "symmetry";
    case ErrorCode::dimension_mismatch: return "dimension_mismatch";
    case ErrorCode::insufficient_data: return "insufficient_data";
    case ErrorCode::degenerate_covariance: return "degenerate_covariance";
    case ErrorCode::non_finite: return "non_finite";
    case ErrorCode::unknown_family: return "unknown_family";
    case ErrorCode::generation_failed: return "generation_failed";
    case ErrorCode::nonstationary: return "nonstationary";
    case ErrorCode::overflow: return "overflow";
    case ErrorCode::invalid_probability: return "invalid_probability";
    case ErrorCode::infeasible_target: return "infeasible_target";
    case ErrorCode::invalid_permutation: return "invalid_permutation";
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::invalid_config: return "invalid_config";
    case ErrorCode::parse: return "parse";
    case ErrorCode::io: return "io";
    case ErrorCode::training_diverged: return "training_diverged";
  }
  return "unknown";
}

}  // namespace cdnn
