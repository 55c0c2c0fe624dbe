#include "cabxde/checkpoint.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include "cabxde/errors.hpp"

namespace cabxde {

using nlohmann::json;

void to_json(json& j, const TrainConfig& cfg) {
  j = json{{"units", cfg.units},
           {"time_step", cfg.time_step},
           {"num_layers", cfg.num_layers},
           {"batch_size", cfg.batch_size},
           {"epochs", cfg.epochs},
           {"dropout", cfg.dropout},
           {"patience", cfg.patience},
           {"learning_rate", cfg.learning_rate},
           {"attention_gate", cfg.attention_gate},
           {"n_features", cfg.n_features},
           {"seed", cfg.seed}};
}

void from_json(const json& j, TrainConfig& cfg) {
  cfg.units = j.value("units", cfg.units);
  cfg.time_step = j.value("time_step", cfg.time_step);
  cfg.num_layers = j.value("num_layers", cfg.num_layers);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.dropout = j.value("dropout", cfg.dropout);
  cfg.patience = j.value("patience", cfg.patience);
  cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
  cfg.attention_gate = j.value("attention_gate", cfg.attention_gate);
  cfg.n_features = j.value("n_features", cfg.n_features);
  cfg.seed = j.value("seed", cfg.seed);
}

void to_json(json& j, const GbdtConfig& cfg) {
  j = json{{"n_estimators", cfg.n_estimators},
           {"max_depth", cfg.max_depth},
           {"eta", cfg.eta},
           {"lambda", cfg.lambda},
           {"alpha", cfg.alpha},
           {"gamma", cfg.gamma},
           {"subsample", cfg.subsample},
           {"seed", cfg.seed}};
}

void from_json(const json& j, GbdtConfig& cfg) {
  cfg.n_estimators = j.value("n_estimators", cfg.n_estimators);
  cfg.max_depth = j.value("max_depth", cfg.max_depth);
  cfg.eta = j.value("eta", cfg.eta);
  cfg.lambda = j.value("lambda", cfg.lambda);
  cfg.alpha = j.value("alpha", cfg.alpha);
  cfg.gamma = j.value("gamma", cfg.gamma);
  cfg.subsample = j.value("subsample", cfg.subsample);
  cfg.seed = j.value("seed", cfg.seed);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw input_error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw input_error("cannot write file: " + path);
  out << contents;
  if (!out) throw std::runtime_error("write failed: " + path);
}

namespace {

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec);
  return buf;
}

}  // namespace

void save_checkpoint(const std::string& path, const std::string& kind, const json& config_echo,
                     const json& payload) {
  const json doc = {{"schema_version", kCheckpointSchemaVersion},
                    {"kind", kind},
                    {"created_at", utc_now()},
                    {"config", config_echo},
                    {"payload", payload}};
  write_file(path, doc.dump(2) + "\n");
}

json load_checkpoint(const std::string& path, const std::string& kind) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw input_error("checkpoint " + path + ": " + e.what());
  }
  if (doc.value("schema_version", -1) != kCheckpointSchemaVersion)
    throw input_error("checkpoint " + path + ": unsupported schema_version");
  if (doc.value("kind", "") != kind)
    throw input_error("checkpoint " + path + ": kind is '" + doc.value("kind", "") +
                      "', expected '" + kind + "'");
  return doc.at("payload");
}

void save_scaler(const std::string& path, const ScalerParams& scaler, const json& config_echo) {
  json features = json::array();
  for (std::size_t f = 0; f < kFeatureCount; ++f)
    features.push_back({{"name", std::string(kFeatureNames[f])},
                        {"v_min", scaler.ranges[f].v_min},
                        {"v_max", scaler.ranges[f].v_max}});
  save_checkpoint(path, "scaler", config_echo, {{"features", features}});
}

ScalerParams load_scaler(const std::string& path) {
  const json payload = load_checkpoint(path, "scaler");
  ScalerParams scaler;
  const json& features = payload.at("features");
  if (features.size() != kFeatureCount)
    throw input_error("scaler checkpoint " + path + ": wrong feature count");
  for (std::size_t f = 0; f < kFeatureCount; ++f) {
    if (features[f].at("name") != std::string(kFeatureNames[f]))
      throw input_error("scaler checkpoint " + path + ": unexpected feature order");
    scaler.ranges[f] = {features[f].at("v_min").get<double>(),
                        features[f].at("v_max").get<double>()};
  }
  return scaler;
}

void save_bilstm(const std::string& path, BiLstmNetwork& net) {
  json tensors = json::array();
  for (ParamTensor* p : net.params())
    tensors.push_back({{"name", p->name},
                       {"rows", p->value.rows},
                       {"cols", p->value.cols},
                       {"values", p->value.data}});
  const json payload = {{"tensors", tensors},
                        {"seed", net.config.seed},
                        {"best_val_loss", net.best_val_loss}};
  save_checkpoint(path, "bilstm", json(net.config), payload);
}

BiLstmNetwork load_bilstm(const std::string& path) {
  const json payload = load_checkpoint(path, "bilstm");
  json doc = json::parse(read_file(path));
  TrainConfig config = doc.at("config").get<TrainConfig>();
  Rng rng(config.seed);
  BiLstmNetwork net = BiLstmNetwork::init(config, rng);
  net.best_val_loss = payload.value("best_val_loss", net.best_val_loss);

  std::vector<ParamTensor*> params = net.params();
  const json& tensors = payload.at("tensors");
  if (tensors.size() != params.size())
    throw input_error("bilstm checkpoint " + path + ": tensor count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const json& t = tensors[i];
    if (t.at("name") != params[i]->name)
      throw input_error("bilstm checkpoint " + path + ": tensor order mismatch at " +
                        params[i]->name);
    if (t.at("rows").get<std::size_t>() != params[i]->value.rows ||
        t.at("cols").get<std::size_t>() != params[i]->value.cols)
      throw input_error("bilstm checkpoint " + path + ": shape mismatch at " + params[i]->name);
    params[i]->value.data = t.at("values").get<std::vector<double>>();
  }
  return net;
}

void save_gbdt(const std::string& path, const BoostedModel& model, const GbdtConfig& config) {
  json trees = json::array();
  for (const Tree& tree : model.trees) {
    json nodes = json::array();
    for (const TreeNode& n : tree.nodes)
      nodes.push_back({{"feature", n.feature},
                       {"threshold", n.threshold},
                       {"weight", n.weight},
                       {"left", n.left},
                       {"right", n.right}});
    trees.push_back(std::move(nodes));
  }
  const json payload = {{"base_score", model.base_score},
                        {"eta", model.eta},
                        {"feature_count", model.feature_count},
                        {"trees", trees}};
  save_checkpoint(path, "gbdt", json(config), payload);
}

BoostedModel load_gbdt(const std::string& path) {
  const json payload = load_checkpoint(path, "gbdt");
  BoostedModel model;
  model.base_score = payload.at("base_score").get<double>();
  model.eta = payload.at("eta").get<double>();
  model.feature_count = payload.at("feature_count").get<std::size_t>();
  for (const json& nodes : payload.at("trees")) {
    Tree tree;
    for (const json& n : nodes)
      tree.nodes.push_back({n.at("feature").get<int>(), n.at("threshold").get<double>(),
                            n.at("weight").get<double>(), n.at("left").get<int>(),
                            n.at("right").get<int>()});
    model.trees.push_back(std::move(tree));
  }
  return model;
}

void save_ensemble(const std::string& path, const EnsembleArtifact& artifact,
                   const json& config_echo) {
  const json payload = {
      {"weights",
       {{"w_bilstm", artifact.weights.w_bilstm},
        {"w_gbdt", artifact.weights.w_gbdt},
        {"degenerate", artifact.weights.degenerate}}},
      {"stacking",
       {{"intercept", artifact.stacking.intercept},
        {"coef_bilstm", artifact.stacking.coef_bilstm},
        {"coef_gbdt", artifact.stacking.coef_gbdt}}},
      {"errors", {{"bilstm_mape", artifact.e_bilstm}, {"gbdt_mape", artifact.e_gbdt}}},
      {"provenance",
       {{"weights_split", artifact.weights_split}, {"stacking_split", artifact.stacking_split}}}};
  save_checkpoint(path, "ensemble", config_echo, payload);
}

EnsembleArtifact load_ensemble(const std::string& path) {
  const json payload = load_checkpoint(path, "ensemble");
  EnsembleArtifact artifact;
  artifact.weights.w_bilstm = payload.at("weights").at("w_bilstm").get<double>();
  artifact.weights.w_gbdt = payload.at("weights").at("w_gbdt").get<double>();
  artifact.weights.degenerate = payload.at("weights").at("degenerate").get<bool>();
  artifact.stacking.intercept = payload.at("stacking").at("intercept").get<double>();
  artifact.stacking.coef_bilstm = payload.at("stacking").at("coef_bilstm").get<double>();
  artifact.stacking.coef_gbdt = payload.at("stacking").at("coef_gbdt").get<double>();
  artifact.e_bilstm = payload.at("errors").at("bilstm_mape").get<double>();
  artifact.e_gbdt = payload.at("errors").at("gbdt_mape").get<double>();
  artifact.weights_split = payload.at("provenance").at("weights_split").get<std::string>();
  artifact.stacking_split = payload.at("provenance").at("stacking_split").get<std::string>();
  return artifact;
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace cabxde
