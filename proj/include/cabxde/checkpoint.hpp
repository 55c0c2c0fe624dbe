#pragma once

#include <string>

#include <json.hpp>

#include "cabxde/bilstm.hpp"
#include "cabxde/dataio.hpp"
#include "cabxde/ensemble.hpp"
#include "cabxde/gbdt.hpp"

namespace cabxde {

inline constexpr int kCheckpointSchemaVersion = 1;

void to_json(nlohmann::json& j, const TrainConfig& cfg);
void from_json(const nlohmann::json& j, TrainConfig& cfg);
void to_json(nlohmann::json& j, const GbdtConfig& cfg);
void from_json(const nlohmann::json& j, GbdtConfig& cfg);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);

/// Wraps a payload in the checkpoint envelope (schema_version, kind,
/// created_at, config echo) and writes it as indented JSON.
void save_checkpoint(const std::string& path, const std::string& kind,
                     const nlohmann::json& config_echo, const nlohmann::json& payload);
/// Reads and validates the envelope, returning the payload.
nlohmann::json load_checkpoint(const std::string& path, const std::string& kind);

void save_scaler(const std::string& path, const ScalerParams& scaler,
                 const nlohmann::json& config_echo);
ScalerParams load_scaler(const std::string& path);

void save_bilstm(const std::string& path, BiLstmNetwork& net);
BiLstmNetwork load_bilstm(const std::string& path);

void save_gbdt(const std::string& path, const BoostedModel& model, const GbdtConfig& config);
BoostedModel load_gbdt(const std::string& path);

struct EnsembleArtifact {
  ReciprocalWeights weights;
  StackingModel stacking;
  double e_bilstm = 0.0;  // validation MAPE behind the weights
  double e_gbdt = 0.0;
  std::string weights_split;   // split the errors were measured on
  std::string stacking_split;  // split the stacking fit used
};

void save_ensemble(const std::string& path, const EnsembleArtifact& artifact,
                   const nlohmann::json& config_echo);
EnsembleArtifact load_ensemble(const std::string& path);

/// FNV-1a 64-bit digest, hex-encoded; used for split manifests.
std::string fnv1a_hex(std::string_view bytes);

}  // namespace cabxde
