#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ssfnet/model_config.hpp"
#include "ssfnet/synth.hpp"
#include "ssfnet/tracker.hpp"
#include "ssfnet/train.hpp"

namespace ssfnet {

struct PathsConfig {
    std::string data_root = "data";
    std::string checkpoint = "runs/model.ckpt";
    std::string train_log = "runs/train_log.csv";
    std::string results = "runs/results";
    std::string report = "runs/report";

    bool operator==(const PathsConfig&) const = default;
};

struct AppConfig {
    ModelConfig model;
    SynthConfig synth;
    int synth_sequences = 1;
    TrainConfig train;
    TrackerConfig track;
    PathsConfig paths;
    std::uint64_t seed = 0;

    bool operator==(const AppConfig&) const = default;
};

/// Serialised as JSON with sections model, data, train, track, paths and a top-level seed.
std::string to_json(const AppConfig& cfg);
/// Missing keys keep defaults; unknown keys and invalid values throw ConfigError.
AppConfig config_from_json(const std::string& text);
AppConfig load_config(const std::filesystem::path& path);

/// Applies a `section.key=value` override; the value is parsed as JSON, falling back to a string.
void apply_override(AppConfig& cfg, const std::string& assignment);

/// Full model (and optimizer momentum) checkpoint with the config stored as metadata.
void save_model(const Model& model, const AppConfig& cfg, const std::filesystem::path& path);
/// Rebuilds the model from the checkpoint metadata and loads every array; returns
/// the stored config through cfg_out when given.
Model load_model(const std::filesystem::path& path, AppConfig* cfg_out = nullptr);

/// Range and consistency checks; throws ConfigError listing the first violation.
void validate(const AppConfig& cfg);

}  // namespace ssfnet
