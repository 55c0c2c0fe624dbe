#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cabxde/bilstm.hpp"
#include "cabxde/dataio.hpp"
#include "cabxde/gbdt.hpp"

namespace cabxde {

struct DataConfig {
  std::string dataset1;
  std::string dataset2;  // optional second evaluation dataset
  std::string date_format = "%m/%d/%Y";
  double train_fraction = 0.8;
  double validation_fraction = 0.1;  // chronological tail carved from the train split
};

struct PipelineConfig {
  DataConfig data;
  TrainConfig bilstm;
  GbdtConfig gbdt;
  std::string fusion = "stacking";  // "stacking" or "reciprocal"
  std::uint64_t seed = 42;
  std::string output_dir = "out";

  void validate() const;
  /// Derives per-component seeds from the master seed.
  void resolve_seeds();

  std::string path(const std::string& artifact) const;
};

PipelineConfig load_config(const std::string& path);
PipelineConfig config_from_json_text(const std::string& text);

/// Stage 1: parse, split chronologically, fit the scaler on the training
/// core, and write scaler + split manifest artifacts.
void run_ingest(const PipelineConfig& config);

/// Stage 2: train one base model ("bilstm" or "gbdt") on the training-core
/// windows; writes the model checkpoint and a per-epoch/per-round CSV log.
void run_train(const PipelineConfig& config, const std::string& which);

/// Stage 3: validation MAPEs -> reciprocal weights; stacking fit on the test
/// split's base predictions; writes the ensemble checkpoint.
void run_ensemble(const PipelineConfig& config);

/// Stage 4: metric report (model,mape,mae,rmse,n) for a split, price units.
void run_evaluate(const PipelineConfig& config, const std::string& split);

/// Per-date predictions CSV for a split (all available models).
void run_predict(const PipelineConfig& config, const std::string& split);

/// predictions.csv plus an SVG line chart, optionally windowed by date.
void run_export_plot(const PipelineConfig& config, const std::string& split,
                     const std::optional<Date>& from, const std::optional<Date>& to);

}  // namespace cabxde
