#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "cdnn/network.hpp"

namespace cdnn {

inline constexpr int kCheckpointVersion = 1;

/// A trained model together with the fixed covariance it was trained on.
struct Checkpoint {
  ModelParams model;
  Matrix covariance;
  nlohmann::json metadata = nlohmann::json::object();
};

nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j, const std::string& where);

nlohmann::json model_to_json(const ModelParams& m);
/// Throws parse (malformed document) or invalid_config (inconsistent shapes).
ModelParams model_from_json(const nlohmann::json& j);

nlohmann::json checkpoint_to_json(const Checkpoint& c);
Checkpoint checkpoint_from_json(const nlohmann::json& j);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace cdnn
