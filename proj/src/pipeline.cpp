#include "cabxde/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "cabxde/checkpoint.hpp"
#include "cabxde/ensemble.hpp"
#include "cabxde/errors.hpp"
#include "cabxde/metrics.hpp"

namespace cabxde {

using nlohmann::json;

void PipelineConfig::validate() const {
  if (data.dataset1.empty()) throw input_error("config: data.dataset1 path is required");
  if (!(data.train_fraction > 0.0 && data.train_fraction < 1.0))
    throw input_error("config: train_fraction must be in (0, 1)");
  if (!(data.validation_fraction >= 0.0 && data.validation_fraction < 1.0))
    throw input_error("config: validation_fraction must be in [0, 1)");
  if (fusion != "stacking" && fusion != "reciprocal")
    throw input_error("config: fusion must be 'stacking' or 'reciprocal'");
  bilstm.validate();
  gbdt.validate();
}

void PipelineConfig::resolve_seeds() {
  const Rng master(seed);
  bilstm.seed = master.fork(1).seed();
  gbdt.seed = master.fork(2).seed();
  bilstm.n_features = kFeatureCount;
}

std::string PipelineConfig::path(const std::string& artifact) const {
  return (std::filesystem::path(output_dir) / artifact).string();
}

PipelineConfig config_from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw input_error(std::string("config: ") + e.what());
  }
  PipelineConfig cfg;
  if (doc.contains("data")) {
    const json& d = doc["data"];
    cfg.data.dataset1 = d.value("dataset1", cfg.data.dataset1);
    cfg.data.dataset2 = d.value("dataset2", cfg.data.dataset2);
    cfg.data.date_format = d.value("date_format", cfg.data.date_format);
    cfg.data.train_fraction = d.value("train_fraction", cfg.data.train_fraction);
    cfg.data.validation_fraction = d.value("validation_fraction", cfg.data.validation_fraction);
  }
  if (doc.contains("bilstm")) cfg.bilstm = doc["bilstm"].get<TrainConfig>();
  if (doc.contains("gbdt")) cfg.gbdt = doc["gbdt"].get<GbdtConfig>();
  cfg.fusion = doc.value("fusion", cfg.fusion);
  cfg.seed = doc.value("seed", cfg.seed);
  cfg.output_dir = doc.value("output_dir", cfg.output_dir);
  return cfg;
}

PipelineConfig load_config(const std::string& path) {
  return config_from_json_text(read_file(path));
}

namespace {

struct Splits {
  SeriesDataset train_core;
  SeriesDataset val;
  SeriesDataset test;
};

Splits split_dataset(const PipelineConfig& cfg, const SeriesDataset& dataset) {
  auto [train, test] = chrono_split(dataset, cfg.data.train_fraction);
  Splits splits;
  splits.test = std::move(test);
  if (cfg.data.validation_fraction > 0.0) {
    auto [core, val] = chrono_split(train, 1.0 - cfg.data.validation_fraction);
    splits.train_core = std::move(core);
    splits.val = std::move(val);
  } else {
    splits.train_core = std::move(train);
  }
  return splits;
}

SeriesDataset load_dataset1(const PipelineConfig& cfg) {
  return parse_csv(read_file(cfg.data.dataset1), cfg.data.date_format, cfg.data.dataset1);
}

std::size_t window_count(const SeriesDataset& ds, std::size_t time_step) {
  return ds.records.size() > time_step ? ds.records.size() - time_step : 0;
}

json config_echo(const PipelineConfig& cfg) {
  return json{{"dataset1", cfg.data.dataset1},
              {"dataset2", cfg.data.dataset2},
              {"date_format", cfg.data.date_format},
              {"train_fraction", cfg.data.train_fraction},
              {"validation_fraction", cfg.data.validation_fraction},
              {"time_step", cfg.bilstm.time_step},
              {"fusion", cfg.fusion},
              {"seed", cfg.seed}};
}

json split_manifest_entry(const SeriesDataset& ds) {
  json entry = {{"rows", ds.records.size()}, {"digest", fnv1a_hex(to_csv(ds))}};
  if (!ds.records.empty()) {
    entry["first_date"] = ds.records.front().date.iso();
    entry["last_date"] = ds.records.back().date.iso();
  }
  return entry;
}

void require_artifact(const PipelineConfig& cfg, const std::string& artifact) {
  if (!std::filesystem::exists(cfg.path(artifact)))
    throw input_error("missing artifact " + cfg.path(artifact) + " (run the earlier stages first)");
}

void check_manifest(const PipelineConfig& cfg, const Splits& splits) {
  const json manifest = json::parse(read_file(cfg.path("manifest.json")));
  if (manifest.value("time_step", std::size_t{0}) != cfg.bilstm.time_step ||
      manifest.value("train_fraction", -1.0) != cfg.data.train_fraction ||
      manifest.value("validation_fraction", -1.0) != cfg.data.validation_fraction ||
      manifest.value("date_format", "") != cfg.data.date_format)
    throw input_error("manifest was written with a different windowing/split configuration; "
                      "rerun ingest");
  const char* names[3] = {"train", "val", "test"};
  const SeriesDataset* sets[3] = {&splits.train_core, &splits.val, &splits.test};
  for (int i = 0; i < 3; ++i) {
    const std::string digest = fnv1a_hex(to_csv(*sets[i]));
    if (manifest.at("splits").at(names[i]).at("digest") != digest)
      throw input_error(std::string("manifest mismatch for split '") + names[i] +
                        "': dataset or split configuration changed since ingest");
  }
}

Matrix flatten_windows(const std::vector<WindowedSample>& samples) {
  if (samples.empty()) throw input_error("no windowed samples to flatten");
  const std::size_t width = samples.front().inputs.size();
  Matrix out(samples.size(), width);
  for (std::size_t i = 0; i < samples.size(); ++i)
    std::copy(samples[i].inputs.data.begin(), samples[i].inputs.data.end(),
              out.data.begin() + static_cast<std::ptrdiff_t>(i * width));
  return out;
}

std::vector<WindowedSample> split_windows(const PipelineConfig& cfg, const SeriesDataset& split,
                                          const ScalerParams& scaler) {
  return make_windows(apply_scaler(split, scaler), cfg.bilstm.time_step);
}

struct SplitPredictions {
  std::vector<Date> dates;
  std::vector<double> actual;  // price units
  std::vector<std::pair<std::string, std::vector<double>>> models;  // insertion order
};

SeriesDataset select_split(const PipelineConfig& cfg, const std::string& split) {
  if (split == "dataset2") {
    if (cfg.data.dataset2.empty())
      throw input_error("split 'dataset2' requested but config has no data.dataset2 path");
    return parse_csv(read_file(cfg.data.dataset2), cfg.data.date_format, cfg.data.dataset2);
  }
  const Splits splits = split_dataset(cfg, load_dataset1(cfg));
  if (split == "train") return splits.train_core;
  if (split == "val") return splits.val;
  if (split == "test") return splits.test;
  throw input_error("unknown split '" + split + "' (use train, val, test or dataset2)");
}

SplitPredictions compute_predictions(const PipelineConfig& cfg, const std::string& split) {
  require_artifact(cfg, "scaler.json");
  const ScalerParams scaler = load_scaler(cfg.path("scaler.json"));
  const std::vector<WindowedSample> windows =
      split_windows(cfg, select_split(cfg, split), scaler);
  const FeatureRange close_range = scaler.ranges[kCloseIndex];

  SplitPredictions out;
  out.dates.reserve(windows.size());
  out.actual.reserve(windows.size());
  for (const WindowedSample& w : windows) {
    out.dates.push_back(w.target_date);
    out.actual.push_back(inverse_scale(w.target, close_range));
  }

  const bool have_bilstm = std::filesystem::exists(cfg.path("bilstm.json"));
  const bool have_gbdt = std::filesystem::exists(cfg.path("gbdt.json"));
  if (!have_bilstm && !have_gbdt)
    throw input_error("no model checkpoints in " + cfg.output_dir + " (run train first)");
  out.models.reserve(4);  // appends below must not invalidate the p_bl/p_xg views

  if (have_bilstm) {
    BiLstmNetwork net = load_bilstm(cfg.path("bilstm.json"));
    std::vector<double> preds = predict_batch(net, windows);
    for (double& v : preds) v = inverse_scale(v, close_range);
    out.models.emplace_back("bilstm", std::move(preds));
  }
  if (have_gbdt) {
    const BoostedModel model = load_gbdt(cfg.path("gbdt.json"));
    std::vector<double> preds = model.predict_rows(flatten_windows(windows));
    for (double& v : preds) v = inverse_scale(v, close_range);
    out.models.emplace_back("gbdt", std::move(preds));
  }

  if (have_bilstm && have_gbdt && std::filesystem::exists(cfg.path("ensemble.json"))) {
    const EnsembleArtifact ens = load_ensemble(cfg.path("ensemble.json"));
    const std::vector<double>& p_bl = out.models[0].second;
    const std::vector<double>& p_xg = out.models[1].second;
    out.models.emplace_back("reciprocal", weighted_combine(p_bl, p_xg, ens.weights));
    out.models.emplace_back("stacking", stack_predict(ens.stacking, p_bl, p_xg));
  }
  return out;
}

std::string predictions_csv(const SplitPredictions& preds) {
  std::string out = "date,actual";
  for (const auto& [name, series] : preds.models) out += "," + name;
  out += '\n';
  for (std::size_t i = 0; i < preds.dates.size(); ++i) {
    out += preds.dates[i].iso();
    out += ',';
    out += format_double(preds.actual[i]);
    for (const auto& [name, series] : preds.models) {
      out += ',';
      out += format_double(series[i]);
    }
    out += '\n';
  }
  return out;
}

std::string render_svg(const SplitPredictions& preds) {
  static constexpr const char* kColors[] = {"#202020", "#d62728", "#1f77b4", "#2ca02c", "#9467bd"};
  const double width = 960, height = 480, pad = 50;

  double lo = preds.actual[0], hi = preds.actual[0];
  auto scan = [&](const std::vector<double>& s) {
    for (double v : s) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  };
  scan(preds.actual);
  for (const auto& [name, series] : preds.models) scan(series);
  if (!(hi > lo)) hi = lo + 1.0;

  const std::size_t n = preds.dates.size();
  const auto x_at = [&](std::size_t i) {
    return n > 1 ? pad + (width - 2 * pad) * static_cast<double>(i) / static_cast<double>(n - 1)
                 : width / 2;
  };
  const auto y_at = [&](double v) { return height - pad - (height - 2 * pad) * (v - lo) / (hi - lo); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<line x1=\"" << pad << "\" y1=\"" << height - pad << "\" x2=\"" << width - pad
      << "\" y2=\"" << height - pad << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << pad << "\" y1=\"" << pad << "\" x2=\"" << pad << "\" y2=\""
      << height - pad << "\" stroke=\"black\"/>\n";

  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", hi);
  svg << "<text x=\"4\" y=\"" << pad + 4 << "\" font-size=\"12\">" << buf << "</text>\n";
  std::snprintf(buf, sizeof(buf), "%.2f", lo);
  svg << "<text x=\"4\" y=\"" << height - pad << "\" font-size=\"12\">" << buf << "</text>\n";
  svg << "<text x=\"" << pad << "\" y=\"" << height - pad + 16 << "\" font-size=\"12\">"
      << preds.dates.front().iso() << "</text>\n";
  svg << "<text x=\"" << width - pad - 70 << "\" y=\"" << height - pad + 16
      << "\" font-size=\"12\">" << preds.dates.back().iso() << "</text>\n";

  const auto polyline = [&](const std::vector<double>& series, const char* color) {
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.3\" points=\"";
    for (std::size_t i = 0; i < n; ++i) {
      std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", x_at(i), y_at(series[i]));
      svg << buf;
    }
    svg << "\"/>\n";
  };

  polyline(preds.actual, kColors[0]);
  svg << "<text x=\"" << width - pad - 160 << "\" y=\"" << pad << "\" font-size=\"12\" fill=\""
      << kColors[0] << "\">actual</text>\n";
  for (std::size_t m = 0; m < preds.models.size(); ++m) {
    const char* color = kColors[(m + 1) % 5];
    polyline(preds.models[m].second, color);
    svg << "<text x=\"" << width - pad - 160 << "\" y=\"" << pad + 14 * (m + 1)
        << "\" font-size=\"12\" fill=\"" << color << "\">" << preds.models[m].first
        << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace

void run_ingest(const PipelineConfig& cfg) {
  cfg.validate();
  std::filesystem::create_directories(cfg.output_dir);

  const SeriesDataset dataset = load_dataset1(cfg);
  const Splits splits = split_dataset(cfg, dataset);
  if (splits.train_core.records.empty()) throw input_error("ingest: empty training split");

  const ScalerParams scaler = fit_scaler(splits.train_core);
  save_scaler(cfg.path("scaler.json"), scaler, config_echo(cfg));

  json manifest = {{"dataset1", cfg.data.dataset1},
                   {"date_format", cfg.data.date_format},
                   {"train_fraction", cfg.data.train_fraction},
                   {"validation_fraction", cfg.data.validation_fraction},
                   {"time_step", cfg.bilstm.time_step},
                   {"seed", cfg.seed},
                   {"total_rows", dataset.records.size()},
                   {"splits",
                    {{"train", split_manifest_entry(splits.train_core)},
                     {"val", split_manifest_entry(splits.val)},
                     {"test", split_manifest_entry(splits.test)}}},
                   {"windows",
                    {{"train", window_count(splits.train_core, cfg.bilstm.time_step)},
                     {"val", window_count(splits.val, cfg.bilstm.time_step)},
                     {"test", window_count(splits.test, cfg.bilstm.time_step)}}}};
  if (!cfg.data.dataset2.empty()) {
    const SeriesDataset ds2 =
        parse_csv(read_file(cfg.data.dataset2), cfg.data.date_format, cfg.data.dataset2);
    manifest["dataset2"] = {{"path", cfg.data.dataset2}, {"rows", ds2.records.size()}};
  }
  write_file(cfg.path("manifest.json"), manifest.dump(2) + "\n");

  std::cout << "ingest: rows total=" << dataset.records.size()
            << " train=" << splits.train_core.records.size()
            << " val=" << splits.val.records.size() << " test=" << splits.test.records.size()
            << "\n";
  std::cout << "ingest: windows train=" << window_count(splits.train_core, cfg.bilstm.time_step)
            << " val=" << window_count(splits.val, cfg.bilstm.time_step)
            << " test=" << window_count(splits.test, cfg.bilstm.time_step) << "\n";
}

void run_train(const PipelineConfig& cfg, const std::string& which) {
  cfg.validate();
  if (which != "bilstm" && which != "gbdt")
    throw input_error("train: model must be 'bilstm' or 'gbdt', got '" + which + "'");
  require_artifact(cfg, "scaler.json");
  require_artifact(cfg, "manifest.json");

  const ScalerParams scaler = load_scaler(cfg.path("scaler.json"));
  const Splits splits = split_dataset(cfg, load_dataset1(cfg));
  check_manifest(cfg, splits);

  const std::vector<WindowedSample> train_w = split_windows(cfg, splits.train_core, scaler);

  if (which == "bilstm") {
    const std::vector<WindowedSample> val_w = split_windows(cfg, splits.val, scaler);
    Rng init_rng(cfg.bilstm.seed);
    BiLstmNetwork net = BiLstmNetwork::init(cfg.bilstm, init_rng);
    const std::vector<EpochLog> history = train(net, train_w, val_w);
    save_bilstm(cfg.path("bilstm.json"), net);

    std::string log = "epoch,train_loss,val_loss\n";
    for (const EpochLog& e : history)
      log += std::to_string(e.epoch) + "," + format_double(e.train_loss) + "," +
             format_double(e.val_loss) + "\n";
    write_file(cfg.path("bilstm_log.csv"), log);
    std::cout << "train bilstm: epochs_run=" << history.size()
              << " best_val_loss=" << format_double(net.best_val_loss) << "\n";
  } else {
    std::vector<double> targets;
    targets.reserve(train_w.size());
    for (const WindowedSample& w : train_w) targets.push_back(w.target);
    std::vector<BoostRoundLog> rounds;
    const BoostedModel model = fit(flatten_windows(train_w), targets, cfg.gbdt, &rounds);
    save_gbdt(cfg.path("gbdt.json"), model, cfg.gbdt);

    std::string log = "round,train_mse,objective\n";
    for (const BoostRoundLog& r : rounds)
      log += std::to_string(r.round) + "," + format_double(r.train_mse) + "," +
             format_double(r.objective) + "\n";
    write_file(cfg.path("gbdt_log.csv"), log);
    std::cout << "train gbdt: trees=" << model.trees.size()
              << " final_train_mse=" << format_double(rounds.empty() ? 0.0 : rounds.back().train_mse)
              << "\n";
  }
}

void run_ensemble(const PipelineConfig& cfg) {
  cfg.validate();
  require_artifact(cfg, "scaler.json");
  require_artifact(cfg, "manifest.json");
  require_artifact(cfg, "bilstm.json");
  require_artifact(cfg, "gbdt.json");

  const ScalerParams scaler = load_scaler(cfg.path("scaler.json"));
  const Splits splits = split_dataset(cfg, load_dataset1(cfg));
  const FeatureRange close_range = scaler.ranges[kCloseIndex];

  BiLstmNetwork net = load_bilstm(cfg.path("bilstm.json"));
  const BoostedModel gbdt_model = load_gbdt(cfg.path("gbdt.json"));

  const auto price_predictions = [&](const std::vector<WindowedSample>& windows) {
    std::vector<double> p_bl = predict_batch(net, windows);
    std::vector<double> p_xg = gbdt_model.predict_rows(flatten_windows(windows));
    std::vector<double> actual;
    actual.reserve(windows.size());
    for (std::size_t i = 0; i < windows.size(); ++i) {
      p_bl[i] = inverse_scale(p_bl[i], close_range);
      p_xg[i] = inverse_scale(p_xg[i], close_range);
      actual.push_back(inverse_scale(windows[i].target, close_range));
    }
    return std::tuple(std::move(p_bl), std::move(p_xg), std::move(actual));
  };

  const std::vector<WindowedSample> val_w = split_windows(cfg, splits.val, scaler);
  const auto [val_bl, val_xg, val_actual] = price_predictions(val_w);
  const double e_bl = mape(val_actual, val_bl);
  const double e_xg = mape(val_actual, val_xg);
  const ReciprocalWeights weights = reciprocal_weights(e_bl, e_xg);

  const std::vector<WindowedSample> test_w = split_windows(cfg, splits.test, scaler);
  const auto [test_bl, test_xg, test_actual] = price_predictions(test_w);
  const StackingModel stacking = fit_stacking(test_bl, test_xg, test_actual);

  EnsembleArtifact artifact{weights, stacking, e_bl, e_xg, "val", "test"};
  save_ensemble(cfg.path("ensemble.json"), artifact, config_echo(cfg));

  std::cout << "ensemble: val MAPE bilstm=" << format_double(e_bl)
            << " gbdt=" << format_double(e_xg) << "\n";
  std::cout << "ensemble: weights bilstm=" << format_double(weights.w_bilstm)
            << " gbdt=" << format_double(weights.w_gbdt)
            << (weights.degenerate ? " (degenerate: both errors zero)" : "") << "\n";
  std::cout << "ensemble: stacking intercept=" << format_double(stacking.intercept)
            << " coef_bilstm=" << format_double(stacking.coef_bilstm)
            << " coef_gbdt=" << format_double(stacking.coef_gbdt) << "\n";
}

void run_evaluate(const PipelineConfig& cfg, const std::string& split) {
  cfg.validate();
  const SplitPredictions preds = compute_predictions(cfg, split);

  std::string csv = "model,mape,mae,rmse,n\n";
  std::cout << "evaluate split=" << split << " (price units; mape shown as fraction and %)\n";
  for (const auto& [name, series] : preds.models) {
    const EvalResult r = evaluate(preds.actual, series);
    csv += name + "," + format_double(r.mape) + "," + format_double(r.mae) + "," +
           format_double(r.rmse) + "," + std::to_string(r.n) + "\n";
    std::cout << "  " << name << ": mape=" << format_double(r.mape) << " ("
              << format_double(r.mape * 100.0) << "%) mae=" << format_double(r.mae)
              << " rmse=" << format_double(r.rmse) << " n=" << r.n << "\n";
  }
  write_file(cfg.path("report_" + split + ".csv"), csv);
}

void run_predict(const PipelineConfig& cfg, const std::string& split) {
  cfg.validate();
  const SplitPredictions preds = compute_predictions(cfg, split);
  write_file(cfg.path("predictions_" + split + ".csv"), predictions_csv(preds));
  std::cout << "predict split=" << split << ": " << preds.dates.size() << " rows, "
            << preds.models.size() << " model column(s)\n";
}

void run_export_plot(const PipelineConfig& cfg, const std::string& split,
                     const std::optional<Date>& from, const std::optional<Date>& to) {
  cfg.validate();
  SplitPredictions preds = compute_predictions(cfg, split);

  if (from || to) {
    SplitPredictions filtered;
    filtered.models.reserve(preds.models.size());
    for (const auto& [name, series] : preds.models) filtered.models.emplace_back(name, std::vector<double>{});
    for (std::size_t i = 0; i < preds.dates.size(); ++i) {
      if (from && preds.dates[i] < *from) continue;
      if (to && *to < preds.dates[i]) continue;
      filtered.dates.push_back(preds.dates[i]);
      filtered.actual.push_back(preds.actual[i]);
      for (std::size_t m = 0; m < preds.models.size(); ++m)
        filtered.models[m].second.push_back(preds.models[m].second[i]);
    }
    preds = std::move(filtered);
  }
  if (preds.dates.empty()) throw input_error("export-plot: empty date window");

  write_file(cfg.path("predictions.csv"), predictions_csv(preds));
  write_file(cfg.path("plot.svg"), render_svg(preds));
  std::cout << "export-plot split=" << split << ": " << preds.dates.size() << " rows from "
            << preds.dates.front().iso() << " to " << preds.dates.back().iso() << "\n";
}

}  // namespace cabxde
