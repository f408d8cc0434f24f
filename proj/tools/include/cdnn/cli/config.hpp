#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "cdnn/lab.hpp"
#include "cdnn/network.hpp"

namespace cdnn::cli {

inline constexpr int kConfigVersion = 1;

/// Throws Error{io} when unreadable and Error{parse} on malformed JSON.
nlohmann::json load_json_file(const std::filesystem::path& path);

/// Starts from the experiment's defaults and applies every key of `j`.
/// Unknown keys, wrong types and out-of-range values throw invalid_config
/// with a JSON-pointer path in the message.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j, Experiment experiment);

struct TrainSettings {
  ModelSpec model;
  TrainConfig train;
  double val_fraction = 0.2;
  Eigen::Index horizon = 1;
};

/// Same strictness as experiment_config_from_json. The default loss follows
/// the task: mse for regression, cross_entropy for classification.
TrainSettings train_settings_from_json(const nlohmann::json& j, Task task);
nlohmann::json train_settings_to_json(const TrainSettings& s);

}  // namespace cdnn::cli
