#include "cabxde/bilstm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "cabxde/errors.hpp"

namespace cabxde {

void TrainConfig::validate() const {
  if (units == 0 || time_step == 0 || num_layers == 0 || batch_size == 0 || epochs == 0)
    throw input_error("bilstm config: counts must be positive");
  if (n_features == 0) throw input_error("bilstm config: n_features must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw input_error("bilstm config: dropout must be in [0, 1)");
  if (patience == 0 || patience > epochs)
    throw input_error("bilstm config: patience must be in [1, epochs]");
  if (!(learning_rate > 0.0)) throw input_error("bilstm config: learning_rate must be positive");
}

namespace {

GateParams init_gate(const std::string& name, std::size_t in_dim, std::size_t units,
                     double bias_fill, Rng& rng) {
  GateParams g;
  g.w = ParamTensor(name + ".w", in_dim, units);
  g.w.value = glorot_init(in_dim, units, rng);
  g.u = ParamTensor(name + ".u", units, units);
  g.u.value = glorot_init(units, units, rng);
  g.b = ParamTensor(name + ".b", 1, units);
  std::fill(g.b.value.data.begin(), g.b.value.data.end(), bias_fill);
  return g;
}

void collect(GateParams& g, std::vector<ParamTensor*>& out) {
  out.push_back(&g.w);
  out.push_back(&g.u);
  out.push_back(&g.b);
}

}  // namespace

LstmCellParams LstmCellParams::init(const std::string& name, std::size_t in_dim,
                                    std::size_t units, bool attention_gate, Rng& rng) {
  LstmCellParams cell;
  cell.attention_gate = attention_gate;
  cell.in_dim = in_dim;
  cell.units = units;
  cell.input = init_gate(name + ".input", in_dim, units, 0.0, rng);
  if (attention_gate) {
    cell.attn_w = ParamTensor(name + ".attn.w", units, units);
    cell.attn_w.value = glorot_init(units, units, rng);
    cell.attn_b = ParamTensor(name + ".attn.b", 1, units);
    std::fill(cell.attn_b.value.data.begin(), cell.attn_b.value.data.end(), 1.0);
  } else {
    cell.forget = init_gate(name + ".forget", in_dim, units, 1.0, rng);
  }
  cell.candidate = init_gate(name + ".candidate", in_dim, units, 0.0, rng);
  cell.output = init_gate(name + ".output", in_dim, units, 0.0, rng);
  return cell;
}

std::vector<ParamTensor*> LstmCellParams::params() {
  std::vector<ParamTensor*> out;
  collect(input, out);
  if (attention_gate) {
    out.push_back(&attn_w);
    out.push_back(&attn_b);
  } else {
    collect(forget, out);
  }
  collect(candidate, out);
  collect(output, out);
  return out;
}

std::size_t LstmCellParams::param_count() const {
  std::size_t n = 0;
  for (ParamTensor* p : const_cast<LstmCellParams*>(this)->params()) n += p->value.size();
  return n;
}

BiLstmNetwork BiLstmNetwork::init(const TrainConfig& config, Rng& rng) {
  config.validate();
  BiLstmNetwork net;
  net.config = config;
  const std::size_t u = config.units;
  for (std::size_t l = 0; l < config.num_layers; ++l) {
    const std::size_t in_dim = l == 0 ? config.n_features : 2 * u;
    const std::string prefix = "layer" + std::to_string(l);
    BiLayer layer;
    layer.fwd = LstmCellParams::init(prefix + ".fwd", in_dim, u, config.attention_gate, rng);
    layer.bwd = LstmCellParams::init(prefix + ".bwd", in_dim, u, config.attention_gate, rng);
    net.layers.push_back(std::move(layer));
  }
  net.attention.w = ParamTensor("attention.w", 2 * u, u);
  net.attention.w.value = glorot_init(2 * u, u, rng);
  net.attention.b = ParamTensor("attention.b", 1, u);
  net.attention.v = ParamTensor("attention.v", u, 1);
  net.attention.v.value = glorot_init(u, 1, rng);
  net.head_w = ParamTensor("head.w", 2 * u, 1);
  net.head_w.value = glorot_init(2 * u, 1, rng);
  net.head_b = ParamTensor("head.b", 1, 1);
  net.best_val_loss = std::numeric_limits<double>::infinity();
  return net;
}

std::vector<ParamTensor*> BiLstmNetwork::params() {
  std::vector<ParamTensor*> out;
  for (BiLayer& layer : layers) {
    for (ParamTensor* p : layer.fwd.params()) out.push_back(p);
    for (ParamTensor* p : layer.bwd.params()) out.push_back(p);
  }
  out.push_back(&attention.w);
  out.push_back(&attention.b);
  out.push_back(&attention.v);
  out.push_back(&head_w);
  out.push_back(&head_b);
  return out;
}

std::size_t BiLstmNetwork::param_count() const {
  std::size_t n = 0;
  for (ParamTensor* p : const_cast<BiLstmNetwork*>(this)->params()) n += p->value.size();
  return n;
}

namespace {

Matrix gate_sigmoid_derivative(const Matrix& gate) {
  Matrix out = gate;
  for (double& v : out.data) v = v * (1.0 - v);
  return out;
}

Matrix tanh_derivative_from_value(const Matrix& th) {
  Matrix out = th;
  for (double& v : out.data) v = 1.0 - v * v;
  return out;
}

struct StepCache {
  Matrix h_prev, c_prev;
  Matrix ig, fg, cand, og;
  Matrix c, tanh_c, h;
};

struct DirectionCache {
  std::vector<StepCache> steps;  // internal (direction-local) time order
};

struct LayerCache {
  DirectionCache fwd, bwd;
  std::vector<Matrix> output;  // logical time order, B x 2*units
  std::vector<Matrix> masks;   // dropout masks; empty when inactive
};

struct AttnCache {
  std::vector<Matrix> s;  // tanh scores per step, B x units
  Matrix alphas;          // B x T
  Matrix context_raw;     // B x 2*units
  Matrix context;         // after dropout
  Matrix context_mask;
};

struct ForwardCache {
  std::vector<Matrix> inputs;  // T of B x in_dim
  std::vector<LayerCache> layers;
  AttnCache attn;
  Matrix preds;  // B x 1
};

void cell_forward(const LstmCellParams& cell, const Matrix& x, StepCache& s) {
  s.ig = sigmoid(add_rowvec(add(matmul(x, cell.input.w.value), matmul(s.h_prev, cell.input.u.value)),
                            cell.input.b.value));
  if (cell.attention_gate) {
    s.fg = sigmoid(add_rowvec(matmul(s.c_prev, cell.attn_w.value), cell.attn_b.value));
  } else {
    s.fg = sigmoid(add_rowvec(
        add(matmul(x, cell.forget.w.value), matmul(s.h_prev, cell.forget.u.value)),
        cell.forget.b.value));
  }
  s.cand = tanh_act(add_rowvec(
      add(matmul(x, cell.candidate.w.value), matmul(s.h_prev, cell.candidate.u.value)),
      cell.candidate.b.value));
  s.og = sigmoid(add_rowvec(add(matmul(x, cell.output.w.value), matmul(s.h_prev, cell.output.u.value)),
                            cell.output.b.value));
  s.c = add(hadamard(s.fg, s.c_prev), hadamard(s.ig, s.cand));
  s.tanh_c = tanh_act(s.c);
  s.h = hadamard(s.og, s.tanh_c);
  if (!all_finite(s.c) || !all_finite(s.h))
    throw std::runtime_error("lstm cell step produced a non-finite state");
}

void direction_forward(const LstmCellParams& cell, const std::vector<Matrix>& inputs,
                       bool backward, DirectionCache& dir) {
  const std::size_t t_total = inputs.size();
  const std::size_t batch = inputs.front().rows;
  dir.steps.assign(t_total, {});
  Matrix h(batch, cell.units);
  Matrix c(batch, cell.units);
  for (std::size_t step = 0; step < t_total; ++step) {
    const std::size_t logical = backward ? t_total - 1 - step : step;
    StepCache& s = dir.steps[step];
    s.h_prev = std::move(h);
    s.c_prev = std::move(c);
    cell_forward(cell, inputs[logical], s);
    h = s.h;
    c = s.c;
  }
}

void layer_forward(const BiLayer& layer, const std::vector<Matrix>& inputs, bool training,
                   double dropout, Rng* rng, LayerCache& lc) {
  const std::size_t t_total = inputs.size();
  direction_forward(layer.fwd, inputs, false, lc.fwd);
  direction_forward(layer.bwd, inputs, true, lc.bwd);
  lc.output.assign(t_total, {});
  const bool use_dropout = training && dropout > 0.0;
  if (use_dropout) lc.masks.assign(t_total, {});
  for (std::size_t t = 0; t < t_total; ++t) {
    Matrix out = concat_cols(lc.fwd.steps[t].h, lc.bwd.steps[t_total - 1 - t].h);
    if (use_dropout) {
      lc.masks[t] = dropout_mask(out.rows, out.cols, dropout, *rng);
      out = hadamard(out, lc.masks[t]);
    }
    lc.output[t] = std::move(out);
  }
}

void attention_forward(const BiLstmNetwork& net, const std::vector<Matrix>& seq, bool training,
                       Rng* rng, AttnCache& ac) {
  const std::size_t t_total = seq.size();
  const std::size_t batch = seq.front().rows;
  const std::size_t width = seq.front().cols;
  ac.s.assign(t_total, {});
  Matrix scores(batch, t_total);
  for (std::size_t t = 0; t < t_total; ++t) {
    ac.s[t] = tanh_act(add_rowvec(matmul(seq[t], net.attention.w.value), net.attention.b.value));
    const Matrix e_t = matmul(ac.s[t], net.attention.v.value);  // B x 1
    for (std::size_t b = 0; b < batch; ++b) scores(b, t) = e_t(b, 0);
  }
  ac.alphas = softmax_rows(scores);
  ac.context_raw = Matrix(batch, width);
  for (std::size_t t = 0; t < t_total; ++t)
    for (std::size_t b = 0; b < batch; ++b) {
      const double a = ac.alphas(b, t);
      for (std::size_t j = 0; j < width; ++j) ac.context_raw(b, j) += a * seq[t](b, j);
    }
  if (training && net.config.dropout > 0.0) {
    ac.context_mask = dropout_mask(batch, width, net.config.dropout, *rng);
    ac.context = hadamard(ac.context_raw, ac.context_mask);
  } else {
    ac.context = ac.context_raw;
  }
}

void network_forward(const BiLstmNetwork& net, std::vector<Matrix> inputs, bool training,
                     Rng* dropout_rng, ForwardCache& fc) {
  fc.inputs = std::move(inputs);
  fc.layers.assign(net.layers.size(), {});
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const std::vector<Matrix>& cur = l == 0 ? fc.inputs : fc.layers[l - 1].output;
    layer_forward(net.layers[l], cur, training, net.config.dropout, dropout_rng, fc.layers[l]);
  }
  attention_forward(net, fc.layers.back().output, training, dropout_rng, fc.attn);
  fc.preds = matmul(fc.attn.context, net.head_w.value);
  for (double& v : fc.preds.data) v += net.head_b.value(0, 0);
}

void direction_backward(LstmCellParams& cell, const DirectionCache& dir,
                        const std::vector<Matrix>& inputs, bool backward,
                        const std::vector<Matrix>& d_h_internal, std::vector<Matrix>* dx_logical) {
  const std::size_t t_total = dir.steps.size();
  const std::size_t batch = d_h_internal.front().rows;
  Matrix dh_rec(batch, cell.units);
  Matrix dc_rec(batch, cell.units);
  for (std::size_t step = t_total; step-- > 0;) {
    const StepCache& s = dir.steps[step];
    const std::size_t logical = backward ? t_total - 1 - step : step;
    const Matrix& x = inputs[logical];

    const Matrix dh_total = add(d_h_internal[step], dh_rec);
    const Matrix dz_o = hadamard(hadamard(dh_total, s.tanh_c), gate_sigmoid_derivative(s.og));
    const Matrix dc =
        add(dc_rec, hadamard(hadamard(dh_total, s.og), tanh_derivative_from_value(s.tanh_c)));
    const Matrix dz_i = hadamard(hadamard(dc, s.cand), gate_sigmoid_derivative(s.ig));
    const Matrix dz_c = hadamard(hadamard(dc, s.ig), tanh_derivative_from_value(s.cand));
    const Matrix dz_f = hadamard(hadamard(dc, s.c_prev), gate_sigmoid_derivative(s.fg));

    Matrix dc_prev = hadamard(dc, s.fg);
    Matrix dh_prev = matmul_bt(dz_i, cell.input.u.value);
    add_inplace(dh_prev, matmul_bt(dz_c, cell.candidate.u.value));
    add_inplace(dh_prev, matmul_bt(dz_o, cell.output.u.value));

    add_inplace(cell.input.w.grad, matmul_at(x, dz_i));
    add_inplace(cell.input.u.grad, matmul_at(s.h_prev, dz_i));
    add_inplace(cell.input.b.grad, colsum(dz_i));
    add_inplace(cell.candidate.w.grad, matmul_at(x, dz_c));
    add_inplace(cell.candidate.u.grad, matmul_at(s.h_prev, dz_c));
    add_inplace(cell.candidate.b.grad, colsum(dz_c));
    add_inplace(cell.output.w.grad, matmul_at(x, dz_o));
    add_inplace(cell.output.u.grad, matmul_at(s.h_prev, dz_o));
    add_inplace(cell.output.b.grad, colsum(dz_o));

    if (cell.attention_gate) {
      add_inplace(cell.attn_w.grad, matmul_at(s.c_prev, dz_f));
      add_inplace(cell.attn_b.grad, colsum(dz_f));
      add_inplace(dc_prev, matmul_bt(dz_f, cell.attn_w.value));
    } else {
      add_inplace(cell.forget.w.grad, matmul_at(x, dz_f));
      add_inplace(cell.forget.u.grad, matmul_at(s.h_prev, dz_f));
      add_inplace(cell.forget.b.grad, colsum(dz_f));
      add_inplace(dh_prev, matmul_bt(dz_f, cell.forget.u.value));
    }

    if (dx_logical) {
      Matrix dx = matmul_bt(dz_i, cell.input.w.value);
      add_inplace(dx, matmul_bt(dz_c, cell.candidate.w.value));
      add_inplace(dx, matmul_bt(dz_o, cell.output.w.value));
      if (!cell.attention_gate) add_inplace(dx, matmul_bt(dz_f, cell.forget.w.value));
      add_inplace((*dx_logical)[logical], dx);
    }

    dh_rec = std::move(dh_prev);
    dc_rec = std::move(dc_prev);
  }
}

void network_backward(BiLstmNetwork& net, const ForwardCache& fc, const Matrix& dpreds) {
  const std::size_t t_total = fc.layers.back().output.size();
  const std::size_t batch = dpreds.rows;
  const std::size_t units = net.config.units;
  const std::size_t width = 2 * units;

  add_inplace(net.head_w.grad, matmul_at(fc.attn.context, dpreds));
  net.head_b.grad(0, 0) += sum(dpreds);
  Matrix dcontext = matmul_bt(dpreds, net.head_w.value);
  if (!fc.attn.context_mask.empty()) dcontext = hadamard(dcontext, fc.attn.context_mask);

  const std::vector<Matrix>& seq = fc.layers.back().output;
  Matrix dalpha(batch, t_total);
  std::vector<Matrix> dh(t_total, Matrix(batch, width));
  for (std::size_t t = 0; t < t_total; ++t)
    for (std::size_t b = 0; b < batch; ++b) {
      double acc = 0.0;
      const double a = fc.attn.alphas(b, t);
      for (std::size_t j = 0; j < width; ++j) {
        acc += dcontext(b, j) * seq[t](b, j);
        dh[t](b, j) += a * dcontext(b, j);
      }
      dalpha(b, t) = acc;
    }

  Matrix de(batch, t_total);
  for (std::size_t b = 0; b < batch; ++b) {
    double dot = 0.0;
    for (std::size_t t = 0; t < t_total; ++t) dot += fc.attn.alphas(b, t) * dalpha(b, t);
    for (std::size_t t = 0; t < t_total; ++t)
      de(b, t) = fc.attn.alphas(b, t) * (dalpha(b, t) - dot);
  }

  for (std::size_t t = 0; t < t_total; ++t) {
    Matrix de_t(batch, 1);
    for (std::size_t b = 0; b < batch; ++b) de_t(b, 0) = de(b, t);
    add_inplace(net.attention.v.grad, matmul_at(fc.attn.s[t], de_t));
    const Matrix ds = matmul_bt(de_t, net.attention.v.value);
    const Matrix dz = hadamard(ds, tanh_derivative_from_value(fc.attn.s[t]));
    add_inplace(net.attention.w.grad, matmul_at(seq[t], dz));
    add_inplace(net.attention.b.grad, colsum(dz));
    add_inplace(dh[t], matmul_bt(dz, net.attention.w.value));
  }

  std::vector<Matrix> dout = std::move(dh);
  for (std::size_t l = net.layers.size(); l-- > 0;) {
    const LayerCache& lc = fc.layers[l];
    if (!lc.masks.empty())
      for (std::size_t t = 0; t < t_total; ++t) dout[t] = hadamard(dout[t], lc.masks[t]);

    std::vector<Matrix> d_fwd(t_total), d_bwd(t_total);
    for (std::size_t step = 0; step < t_total; ++step) {
      d_fwd[step] = slice_cols(dout[step], 0, units);
      d_bwd[step] = slice_cols(dout[t_total - 1 - step], units, width);
    }

    const std::vector<Matrix>& inputs = l == 0 ? fc.inputs : fc.layers[l - 1].output;
    std::vector<Matrix>* dx_ptr = nullptr;
    std::vector<Matrix> dx;
    if (l > 0) {
      dx.assign(t_total, Matrix(batch, inputs.front().cols));
      dx_ptr = &dx;
    }
    direction_backward(net.layers[l].fwd, lc.fwd, inputs, false, d_fwd, dx_ptr);
    direction_backward(net.layers[l].bwd, lc.bwd, inputs, true, d_bwd, dx_ptr);
    if (l > 0) dout = std::move(dx);
  }
}

std::vector<Matrix> batch_inputs(const std::vector<WindowedSample>& samples,
                                 const std::vector<std::size_t>& idx, std::size_t first,
                                 std::size_t count) {
  const std::size_t t_total = samples.front().inputs.rows;
  const std::size_t n_features = samples.front().inputs.cols;
  std::vector<Matrix> xs(t_total, Matrix(count, n_features));
  for (std::size_t b = 0; b < count; ++b) {
    const Matrix& in = samples[idx[first + b]].inputs;
    for (std::size_t t = 0; t < t_total; ++t)
      for (std::size_t f = 0; f < n_features; ++f) xs[t](b, f) = in(t, f);
  }
  return xs;
}

void check_sample_shape(const BiLstmNetwork& net, const WindowedSample& sample) {
  if (sample.inputs.rows != net.config.time_step || sample.inputs.cols != net.config.n_features)
    throw std::invalid_argument("bilstm: sample shape does not match network config");
}

}  // namespace

void lstm_cell_step(const Matrix& x, const Matrix& h_prev, const Matrix& c_prev,
                    const LstmCellParams& cell, Matrix& h_out, Matrix& c_out) {
  if (x.cols != cell.in_dim || h_prev.cols != cell.units || c_prev.cols != cell.units ||
      x.rows != h_prev.rows || x.rows != c_prev.rows)
    throw std::invalid_argument("lstm_cell_step: dimension mismatch");
  StepCache s;
  s.h_prev = h_prev;
  s.c_prev = c_prev;
  cell_forward(cell, x, s);
  h_out = std::move(s.h);
  c_out = std::move(s.c);
}

Matrix bilstm_forward(const BiLstmNetwork& net, const Matrix& sample_inputs) {
  if (sample_inputs.cols != net.config.n_features)
    throw std::invalid_argument("bilstm_forward: feature width mismatch");
  const std::size_t t_total = sample_inputs.rows;
  std::vector<Matrix> xs(t_total, Matrix(1, net.config.n_features));
  for (std::size_t t = 0; t < t_total; ++t)
    for (std::size_t f = 0; f < net.config.n_features; ++f) xs[t](0, f) = sample_inputs(t, f);

  std::vector<LayerCache> layers(net.layers.size());
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const std::vector<Matrix>& cur = l == 0 ? xs : layers[l - 1].output;
    layer_forward(net.layers[l], cur, false, 0.0, nullptr, layers[l]);
  }

  Matrix out(t_total, 2 * net.config.units);
  for (std::size_t t = 0; t < t_total; ++t)
    for (std::size_t j = 0; j < out.cols; ++j) out(t, j) = layers.back().output[t](0, j);
  return out;
}

AttentionResult temporal_attention(const BiLstmNetwork& net, const Matrix& hidden_seq) {
  if (hidden_seq.rows == 0) throw std::invalid_argument("temporal_attention: empty sequence");
  std::vector<Matrix> seq(hidden_seq.rows);
  for (std::size_t t = 0; t < hidden_seq.rows; ++t) {
    seq[t] = Matrix(1, hidden_seq.cols);
    for (std::size_t j = 0; j < hidden_seq.cols; ++j) seq[t](0, j) = hidden_seq(t, j);
  }
  AttnCache ac;
  attention_forward(net, seq, false, nullptr, ac);
  AttentionResult result;
  result.context.assign(ac.context.data.begin(), ac.context.data.end());
  result.alphas.resize(hidden_seq.rows);
  for (std::size_t t = 0; t < hidden_seq.rows; ++t) result.alphas[t] = ac.alphas(0, t);
  return result;
}

double predict(const BiLstmNetwork& net, const Matrix& sample_inputs) {
  const Matrix hidden = bilstm_forward(net, sample_inputs);
  const AttentionResult attn = temporal_attention(net, hidden);
  double out = net.head_b.value(0, 0);
  for (std::size_t j = 0; j < attn.context.size(); ++j)
    out += attn.context[j] * net.head_w.value(j, 0);
  return out;
}

std::vector<double> predict_batch(const BiLstmNetwork& net,
                                  const std::vector<WindowedSample>& samples) {
  std::vector<double> preds;
  preds.reserve(samples.size());
  if (samples.empty()) return preds;
  check_sample_shape(net, samples.front());
  std::vector<std::size_t> idx(samples.size());
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t start = 0; start < samples.size(); start += net.config.batch_size) {
    const std::size_t count = std::min(net.config.batch_size, samples.size() - start);
    ForwardCache fc;
    network_forward(net, batch_inputs(samples, idx, start, count), false, nullptr, fc);
    for (std::size_t b = 0; b < count; ++b) preds.push_back(fc.preds(b, 0));
  }
  return preds;
}

double mse_loss(const BiLstmNetwork& net, const std::vector<WindowedSample>& samples) {
  if (samples.empty()) throw std::invalid_argument("mse_loss: empty sample set");
  const std::vector<double> preds = predict_batch(net, samples);
  double acc = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double r = preds[i] - samples[i].target;
    acc += r * r;
  }
  return acc / static_cast<double>(samples.size());
}

std::vector<EpochLog> train(BiLstmNetwork& net, const std::vector<WindowedSample>& train_samples,
                            const std::vector<WindowedSample>& val_samples) {
  const TrainConfig& cfg = net.config;
  cfg.validate();
  if (train_samples.empty() || val_samples.empty())
    throw input_error("bilstm train: empty training or validation split");
  check_sample_shape(net, train_samples.front());
  check_sample_shape(net, val_samples.front());

  std::vector<ParamTensor*> params = net.params();
  AdamOptimizer optimizer({cfg.learning_rate, 0.9, 0.999, 1e-8});
  Rng shuffle_rng = Rng(cfg.seed).fork(101);
  Rng dropout_rng = Rng(cfg.seed).fork(102);

  std::vector<std::size_t> idx(train_samples.size());
  std::iota(idx.begin(), idx.end(), 0);

  std::vector<EpochLog> history;
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<Matrix> best_values;
  std::size_t epochs_without_improvement = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(idx);
    double loss_acc = 0.0;
    for (std::size_t start = 0; start < idx.size(); start += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, idx.size() - start);
      ForwardCache fc;
      network_forward(net, batch_inputs(train_samples, idx, start, count), true, &dropout_rng, fc);

      double batch_loss = 0.0;
      Matrix dpreds(count, 1);
      for (std::size_t b = 0; b < count; ++b) {
        const double r = fc.preds(b, 0) - train_samples[idx[start + b]].target;
        batch_loss += r * r;
        dpreds(b, 0) = 2.0 * r / static_cast<double>(count);
      }
      batch_loss /= static_cast<double>(count);
      if (!std::isfinite(batch_loss))
        throw std::runtime_error("bilstm train: non-finite loss at epoch " + std::to_string(epoch));
      loss_acc += batch_loss * static_cast<double>(count);

      for (ParamTensor* p : params) p->zero_grad();
      network_backward(net, fc, dpreds);
      optimizer.step(params);
    }

    const double train_loss = loss_acc / static_cast<double>(train_samples.size());
    const double val_loss = mse_loss(net, val_samples);
    history.push_back({epoch, train_loss, val_loss});

    if (val_loss < best_val) {
      best_val = val_loss;
      best_values.clear();
      for (ParamTensor* p : params) best_values.push_back(p->value);
      epochs_without_improvement = 0;
    } else if (++epochs_without_improvement >= cfg.patience) {
      break;
    }
  }

  if (!best_values.empty())
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = best_values[i];
  net.best_val_loss = best_val;
  return history;
}

double gradient_check(BiLstmNetwork& net, const std::vector<WindowedSample>& samples, double h) {
  if (samples.empty()) throw std::invalid_argument("gradient_check: empty sample set");
  check_sample_shape(net, samples.front());
  std::vector<std::size_t> idx(samples.size());
  std::iota(idx.begin(), idx.end(), 0);

  const auto loss_fn = [&]() {
    ForwardCache fc;
    network_forward(net, batch_inputs(samples, idx, 0, samples.size()), false, nullptr, fc);
    double acc = 0.0;
    for (std::size_t b = 0; b < samples.size(); ++b) {
      const double r = fc.preds(b, 0) - samples[b].target;
      acc += r * r;
    }
    return acc / static_cast<double>(samples.size());
  };

  ForwardCache fc;
  network_forward(net, batch_inputs(samples, idx, 0, samples.size()), false, nullptr, fc);
  Matrix dpreds(samples.size(), 1);
  for (std::size_t b = 0; b < samples.size(); ++b)
    dpreds(b, 0) = 2.0 * (fc.preds(b, 0) - samples[b].target) / static_cast<double>(samples.size());

  std::vector<ParamTensor*> params = net.params();
  for (ParamTensor* p : params) p->zero_grad();
  network_backward(net, fc, dpreds);
  return finite_diff_check(loss_fn, params, h);
}

}  // namespace cabxde
