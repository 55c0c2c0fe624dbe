#pragma once

#include <cstdint>
#include <vector>

#include "cabxde/dataio.hpp"
#include "cabxde/matrix.hpp"
#include "cabxde/param.hpp"
#include "cabxde/rng.hpp"

namespace cabxde {

struct TrainConfig {
  std::size_t units = 99;
  std::size_t time_step = 99;
  std::size_t num_layers = 2;
  std::size_t batch_size = 64;
  std::size_t epochs = 64;
  double dropout = 0.2;
  std::size_t patience = 10;  // early stopping on validation loss
  double learning_rate = 0.001;
  bool attention_gate = true;  // attention gate in place of the forget gate
  std::size_t n_features = kFeatureCount;
  std::uint64_t seed = 0;

  void validate() const;
};

struct GateParams {
  ParamTensor w;  // in_dim x units
  ParamTensor u;  // units x units (recurrent)
  ParamTensor b;  // 1 x units
};

/// One LSTM cell. The standard variant carries a full forget gate; the
/// attention-gate variant replaces it with a gate computed from the previous
/// cell state alone, dropping the input-facing forget weights.
struct LstmCellParams {
  bool attention_gate = false;
  std::size_t in_dim = 0;
  std::size_t units = 0;
  GateParams input, candidate, output;
  GateParams forget;    // standard variant only
  ParamTensor attn_w;   // units x units, over c_prev
  ParamTensor attn_b;   // 1 x units

  static LstmCellParams init(const std::string& name, std::size_t in_dim, std::size_t units,
                             bool attention_gate, Rng& rng);
  std::vector<ParamTensor*> params();
  std::size_t param_count() const;
};

struct BiLayer {
  LstmCellParams fwd;
  LstmCellParams bwd;
};

/// Additive scoring over the per-step hidden states of the last layer.
struct TemporalAttentionParams {
  ParamTensor w;  // 2*units x units
  ParamTensor b;  // 1 x units
  ParamTensor v;  // units x 1
};

struct BiLstmNetwork {
  TrainConfig config;
  std::vector<BiLayer> layers;
  TemporalAttentionParams attention;
  ParamTensor head_w;  // 2*units x 1
  ParamTensor head_b;  // 1 x 1
  double best_val_loss = 0.0;

  static BiLstmNetwork init(const TrainConfig& config, Rng& rng);
  std::vector<ParamTensor*> params();
  std::size_t param_count() const;
};

/// One cell update on a batch: rows of x / h_prev / c_prev are samples.
/// Returns (h_t, c_t) through the output arguments.
void lstm_cell_step(const Matrix& x, const Matrix& h_prev, const Matrix& c_prev,
                    const LstmCellParams& cell, Matrix& h_out, Matrix& c_out);

/// Final-layer hidden sequence for one sample: time_step x 2*units, row t
/// concatenating the forward and backward hidden states at t. Dropout off.
Matrix bilstm_forward(const BiLstmNetwork& net, const Matrix& sample_inputs);

struct AttentionResult {
  std::vector<double> context;  // 2*units
  std::vector<double> alphas;   // one weight per time step, sums to 1
};

AttentionResult temporal_attention(const BiLstmNetwork& net, const Matrix& hidden_seq);

/// Deterministic prediction of the scaled close for one windowed sample.
double predict(const BiLstmNetwork& net, const Matrix& sample_inputs);
std::vector<double> predict_batch(const BiLstmNetwork& net,
                                  const std::vector<WindowedSample>& samples);

/// Mean squared error on scaled targets, dropout off.
double mse_loss(const BiLstmNetwork& net, const std::vector<WindowedSample>& samples);

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

/// BPTT + Adam on mean squared error over scaled targets; stops early when
/// validation loss fails to improve for `patience` epochs and restores the
/// best-validation parameters.
std::vector<EpochLog> train(BiLstmNetwork& net, const std::vector<WindowedSample>& train_samples,
                            const std::vector<WindowedSample>& val_samples);

/// Max relative error between BPTT gradients and central finite differences
/// over every parameter, on the given (small) sample set. Dropout off.
double gradient_check(BiLstmNetwork& net, const std::vector<WindowedSample>& samples, double h);

}  // namespace cabxde
