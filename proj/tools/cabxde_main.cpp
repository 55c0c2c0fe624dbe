#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cabxde/errors.hpp"
#include "cabxde/pipeline.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> fusion;
  std::optional<std::string> date_format;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "Path to a JSON pipeline config");
  cmd->add_option("--seed", args.seed, "Master seed (overrides config)");
  cmd->add_option("--fusion", args.fusion, "Fusion mode: reciprocal or stacking")
      ->check(CLI::IsMember({"reciprocal", "stacking"}));
  cmd->add_option("--date-format", args.date_format,
                  "Input date format, e.g. %m/%d/%Y or %Y-%m-%d");
}

cabxde::PipelineConfig build_config(const CommonArgs& args) {
  cabxde::PipelineConfig cfg;
  if (!args.config_path.empty()) cfg = cabxde::load_config(args.config_path);
  if (args.seed) cfg.seed = *args.seed;
  if (args.fusion) cfg.fusion = *args.fusion;
  if (args.date_format) cfg.data.date_format = *args.date_format;
  cfg.resolve_seeds();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cabxde: BiLSTM + boosted-tree ensemble forecaster for daily OHLCV series"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string train_model;
  std::string split = "test";
  std::string from_str, to_str;

  CLI::App* ingest = app.add_subcommand("ingest", "Parse, split and scale the input data");
  add_common(ingest, args);

  CLI::App* train = app.add_subcommand("train", "Train one base model");
  train->add_option("model", train_model, "Which model: bilstm or gbdt")
      ->required()
      ->check(CLI::IsMember({"bilstm", "gbdt"}));
  add_common(train, args);

  CLI::App* ensemble = app.add_subcommand("ensemble", "Fit reciprocal weights and stacking");
  add_common(ensemble, args);

  CLI::App* evaluate = app.add_subcommand("evaluate", "Write the metric report for a split");
  evaluate->add_option("--split", split, "train, val, test or dataset2");
  add_common(evaluate, args);

  CLI::App* predict = app.add_subcommand("predict", "Write per-date predictions for a split");
  predict->add_option("--split", split, "train, val, test or dataset2");
  add_common(predict, args);

  CLI::App* plot = app.add_subcommand("export-plot", "Write predictions.csv and plot.svg");
  plot->add_option("--split", split, "train, val, test or dataset2");
  plot->add_option("--from", from_str, "First target date (ISO, inclusive)");
  plot->add_option("--to", to_str, "Last target date (ISO, inclusive)");
  add_common(plot, args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const cabxde::PipelineConfig cfg = build_config(args);
    if (ingest->parsed()) {
      cabxde::run_ingest(cfg);
    } else if (train->parsed()) {
      cabxde::run_train(cfg, train_model);
    } else if (ensemble->parsed()) {
      cabxde::run_ensemble(cfg);
    } else if (evaluate->parsed()) {
      cabxde::run_evaluate(cfg, split);
    } else if (predict->parsed()) {
      cabxde::run_predict(cfg, split);
    } else if (plot->parsed()) {
      std::optional<cabxde::Date> from, to;
      if (!from_str.empty()) from = cabxde::Date::parse(from_str, "%Y-%m-%d");
      if (!to_str.empty()) to = cabxde::Date::parse(to_str, "%Y-%m-%d");
      cabxde::run_export_plot(cfg, split, from, to);
    }
  } catch (const cabxde::input_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
