#pragma once

#include <memory>
#include <span>

#include "eegnet/ops.hpp"
#include "eegnet/params.hpp"

namespace eegnet {

// ---------------------------------------------------------------------------
// Initialization (uniform Glorot for weights, zero biases, forget bias 1)

inline void init_glorot_uniform(Rng& rng, Tensor& w, long fan_in, long fan_out) {
  const Real limit = std::sqrt(Real(6) / static_cast<Real>(fan_in + fan_out));
  for (Real& v : w.data) v = rng.uniform(-limit, limit);
}

// ---------------------------------------------------------------------------
// Time-distributed dense: one affine map shared by every time column.

struct TdFCLayer {
  Tensor* weight = nullptr;  // [out x in]
  Tensor* bias = nullptr;    // [out]
  Activation act = Activation::Linear;
};

inline Value tdfc_forward(Graph& g, Value x, const TdFCLayer& layer) {
  Value w = g.param(layer.weight);
  Value b = g.param(layer.bias);
  Value y = add_col(g, matmul(g, w, x), b);
  return activation(g, y, layer.act, /*softmax_axis=*/0);
}

// ---------------------------------------------------------------------------
// Space-distributed temporal convolution: one kernel bank shared by every
// space row; stride fixed at 1.

struct SdCLayer {
  Tensor* kernels = nullptr;  // [C x k]
  Tensor* bias = nullptr;     // [C]
  Activation act = Activation::Linear;
};

inline Value sdc_forward(Graph& g, Value x, const SdCLayer& layer) {
  Value k = g.param(layer.kernels);
  Value b = g.param(layer.bias);
  Value y = sdc_conv(g, x, k, b);
  return activation(g, y, layer.act, /*softmax_axis=*/1);
}

// ---------------------------------------------------------------------------
// The basic intertwined module: tdFC, sdC, time pooling, flatten.

struct IntertwinedModule {
  TdFCLayer tdfc;
  SdCLayer sdc;
  long pool_size = 2;
  PoolKind pool_kind = PoolKind::Average;
};

inline Value intertwined_forward(Graph& g, Value x, const IntertwinedModule& m,
                                 int module_index = -1) {
  try {
    Value y = tdfc_forward(g, x, m.tdfc);
    y = sdc_forward(g, y, m.sdc);
    y = time_pool(g, y, m.pool_size, m.pool_kind);
    return flatten_space(g, y);
  } catch (const ShapeError& e) {
    if (module_index < 0) throw;
    throw ShapeError("module " + std::to_string(module_index) + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// LSTM

struct LSTMLayer {
  Tensor* W = nullptr;  // [4H x F] input weights, gate rows ordered i,f,g,o
  Tensor* U = nullptr;  // [4H x H] recurrent weights
  Tensor* b = nullptr;  // [4H]
  long hidden = 0;
};

/// LSTM weight init: Glorot for W and U, zero biases, forget gate bias 1.
inline void init_lstm(Rng& rng, Tensor& W, Tensor& U, Tensor& b, long in_width,
                      long hidden) {
  init_glorot_uniform(rng, W, in_width, hidden);
  init_glorot_uniform(rng, U, hidden, hidden);
  std::fill(b.data.begin(), b.data.end(), Real(0));
  for (long h = 0; h < hidden; ++h) b.data[static_cast<size_t>(hidden + h)] = Real(1);
}

namespace detail {

inline Real sigmoid(Real x) {
  if (x >= 0) return Real(1) / (Real(1) + std::exp(-x));
  const Real e = std::exp(x);
  return e / (Real(1) + e);
}

// Per-trial activations saved for backpropagation through time.
// All arrays are time-major [T x H].
struct LstmSaved {
  long F = 0, H = 0, T = 0;
  std::vector<Real> I, Fg, G, O, C, TC, Hs;
};

inline void lstm_run_forward(const Real* W, const Real* U, const Real* b,
                             const Real* X, long F, long H, long T,
                             LstmSaved& s) {
  s.F = F;
  s.H = H;
  s.T = T;
  const size_t HT = static_cast<size_t>(H * T);
  s.I.resize(HT);
  s.Fg.resize(HT);
  s.G.resize(HT);
  s.O.resize(HT);
  s.C.resize(HT);
  s.TC.resize(HT);
  s.Hs.resize(HT);

  // WX[j, t] = sum_f W[j, f] X[f, t]
  std::vector<Real> WX(static_cast<size_t>(4 * H * T), Real(0));
  for (long j = 0; j < 4 * H; ++j) {
    const Real* wrow = W + j * F;
    Real* out = WX.data() + j * T;
    for (long f = 0; f < F; ++f) {
      const Real wv = wrow[f];
      const Real* xrow = X + f * T;
      for (long t = 0; t < T; ++t) out[t] += wv * xrow[t];
    }
  }

  std::vector<Real> z(static_cast<size_t>(4 * H));
  for (long t = 0; t < T; ++t) {
    const Real* hprev = t > 0 ? s.Hs.data() + (t - 1) * H : nullptr;
    for (long j = 0; j < 4 * H; ++j) {
      Real acc = WX[static_cast<size_t>(j * T + t)] + b[j];
      if (hprev) {
        const Real* urow = U + j * H;
        for (long k = 0; k < H; ++k) acc += urow[k] * hprev[k];
      }
      z[static_cast<size_t>(j)] = acc;
    }
    Real* It = s.I.data() + t * H;
    Real* Ft = s.Fg.data() + t * H;
    Real* Gt = s.G.data() + t * H;
    Real* Ot = s.O.data() + t * H;
    Real* Ct = s.C.data() + t * H;
    Real* TCt = s.TC.data() + t * H;
    Real* Ht = s.Hs.data() + t * H;
    const Real* cprev = t > 0 ? s.C.data() + (t - 1) * H : nullptr;
    for (long h = 0; h < H; ++h) {
      It[h] = sigmoid(z[static_cast<size_t>(h)]);
      Ft[h] = sigmoid(z[static_cast<size_t>(H + h)]);
      Gt[h] = std::tanh(z[static_cast<size_t>(2 * H + h)]);
      Ot[h] = sigmoid(z[static_cast<size_t>(3 * H + h)]);
      Ct[h] = (cprev ? Ft[h] * cprev[h] : Real(0)) + It[h] * Gt[h];
      TCt[h] = std::tanh(Ct[h]);
      Ht[h] = Ot[h] * TCt[h];
    }
  }
}

}  // namespace detail

/// One LSTM layer over a feature sequence x[F×T] with zero initial state.
/// Emits the full hidden sequence [H×T], or only the final state [H].
inline Value lstm_layer_forward(Graph& g, Value x, const LSTMLayer& layer,
                                bool return_last) {
  const Tensor& X = g.val(x);
  if (X.rank() != 2)
    throw ShapeError("lstm expects a rank-2 input, got " + shape_str(X.shape));
  const long F = X.shape[0], T = X.shape[1];
  const long H = layer.hidden;
  if (layer.W->shape[1] != F)
    throw ShapeError("lstm input width " + std::to_string(F) +
                     " does not match weights expecting " +
                     std::to_string(layer.W->shape[1]));

  Value wv = g.param(layer.W);
  Value uv = g.param(layer.U);
  Value bv = g.param(layer.b);

  auto saved = std::make_shared<detail::LstmSaved>();
  detail::lstm_run_forward(layer.W->data.data(), layer.U->data.data(),
                           layer.b->data.data(), X.data.data(), F, H, T,
                           *saved);

  Tensor out;
  if (return_last) {
    out = Tensor(Shape{H});
    std::copy(saved->Hs.end() - H, saved->Hs.end(), out.data.begin());
  } else {
    out = Tensor(Shape{H, T});
    // saved Hs is time-major; output is [H x T]
    for (long t = 0; t < T; ++t)
      for (long h = 0; h < H; ++h) out.at(h, t) = saved->Hs[static_cast<size_t>(t * H + h)];
  }

  return detail::make_node(
      g, std::move(out), {x.id, wv.id, uv.id, bv.id},
      [x, wv, uv, bv, F, H, T, return_last, saved](Graph& gr, Value self) {
        const detail::LstmSaved& s = *saved;
        const std::vector<Real>& go = gr.grad(self);
        const Real* U = gr.val(uv).data.data();
        const Real* W = gr.val(wv).data.data();
        const Real* X = gr.val(x).data.data();

        std::vector<Real> DZ(static_cast<size_t>(T * 4 * H), Real(0));
        std::vector<Real> dh(static_cast<size_t>(H), Real(0));
        std::vector<Real> dc(static_cast<size_t>(H), Real(0));

        std::vector<Real>* dU = gr.live(uv) ? &gr.grad(uv) : nullptr;
        std::vector<Real>* db = gr.live(bv) ? &gr.grad(bv) : nullptr;

        for (long t = T - 1; t >= 0; --t) {
          if (return_last) {
            if (t == T - 1)
              for (long h = 0; h < H; ++h) dh[static_cast<size_t>(h)] += go[static_cast<size_t>(h)];
          } else {
            for (long h = 0; h < H; ++h)
              dh[static_cast<size_t>(h)] += go[static_cast<size_t>(h * T + t)];
          }
          const Real* It = s.I.data() + t * H;
          const Real* Ft = s.Fg.data() + t * H;
          const Real* Gt = s.G.data() + t * H;
          const Real* Ot = s.O.data() + t * H;
          const Real* TCt = s.TC.data() + t * H;
          const Real* cprev = t > 0 ? s.C.data() + (t - 1) * H : nullptr;
          Real* dz = DZ.data() + t * 4 * H;
          for (long h = 0; h < H; ++h) {
            const Real dhv = dh[static_cast<size_t>(h)];
            const Real do_ = dhv * TCt[h];
            dz[3 * H + h] = do_ * Ot[h] * (Real(1) - Ot[h]);
            Real dcv = dc[static_cast<size_t>(h)] +
                       dhv * Ot[h] * (Real(1) - TCt[h] * TCt[h]);
            dz[h] = dcv * Gt[h] * It[h] * (Real(1) - It[h]);
            dz[2 * H + h] = dcv * It[h] * (Real(1) - Gt[h] * Gt[h]);
            const Real cp = cprev ? cprev[h] : Real(0);
            dz[H + h] = dcv * cp * Ft[h] * (Real(1) - Ft[h]);
            dc[static_cast<size_t>(h)] = dcv * Ft[h];
          }
          // carry dh to t-1 and accumulate recurrent/bias grads
          std::fill(dh.begin(), dh.end(), Real(0));
          for (long j = 0; j < 4 * H; ++j) {
            const Real dzv = dz[j];
            if (dzv == Real(0)) continue;
            const Real* urow = U + j * H;
            for (long k = 0; k < H; ++k) dh[static_cast<size_t>(k)] += urow[k] * dzv;
            if (db) (*db)[static_cast<size_t>(j)] += dzv;
            if (dU && t > 0) {
              const Real* hprev = s.Hs.data() + (t - 1) * H;
              Real* durow = dU->data() + j * H;
              for (long k = 0; k < H; ++k) durow[k] += dzv * hprev[k];
            }
          }
        }

        if (gr.live(wv)) {
          Real* dW = gr.grad(wv).data();
          for (long j = 0; j < 4 * H; ++j) {
            Real* dwrow = dW + j * F;
            for (long f = 0; f < F; ++f) {
              const Real* xrow = X + f * T;
              Real acc = 0;
              for (long t = 0; t < T; ++t) acc += DZ[static_cast<size_t>(t * 4 * H + j)] * xrow[t];
              dwrow[f] += acc;
            }
          }
        }
        if (gr.live(x)) {
          Real* dXp = gr.grad(x).data();
          std::vector<Real> dxt(static_cast<size_t>(F));
          for (long t = 0; t < T; ++t) {
            std::fill(dxt.begin(), dxt.end(), Real(0));
            const Real* dz = DZ.data() + t * 4 * H;
            for (long j = 0; j < 4 * H; ++j) {
              const Real dzv = dz[j];
              if (dzv == Real(0)) continue;
              const Real* wrow = W + j * F;
              for (long f = 0; f < F; ++f) dxt[static_cast<size_t>(f)] += dzv * wrow[f];
            }
            for (long f = 0; f < F; ++f) dXp[f * T + t] += dxt[static_cast<size_t>(f)];
          }
        }
      });
}

/// Stacked LSTM: every layer but the last emits the full sequence; inter-layer
/// dropout applies during training only.
inline Value lstm_forward(Graph& g, Value x, std::span<const LSTMLayer> layers,
                          Real dropout_rate, bool training, Rng* rng,
                          bool return_last) {
  if (layers.empty()) throw ConfigError("lstm_forward requires >= 1 layer");
  Value y = x;
  for (size_t i = 0; i < layers.size(); ++i) {
    const bool last = (i + 1 == layers.size());
    y = lstm_layer_forward(g, y, layers[i], last && return_last);
    if (!last && dropout_rate > 0 && training && rng)
      y = dropout(g, y, dropout_rate, training, *rng);
  }
  return y;
}

/// Gate trace of a single layer for property checks: returns the saved
/// sigmoid/tanh activations of a forward pass.
inline detail::LstmSaved lstm_trace(const LSTMLayer& layer, const Tensor& x) {
  detail::LstmSaved s;
  detail::lstm_run_forward(layer.W->data.data(), layer.U->data.data(),
                           layer.b->data.data(), x.data.data(), x.shape[0],
                           layer.hidden, x.shape[1], s);
  return s;
}

// ---------------------------------------------------------------------------
// Fully connected head layers

struct FCLayer {
  Tensor* weight = nullptr;  // [out x in]
  Tensor* bias = nullptr;    // [out]
  Activation act = Activation::Linear;
  Real dropout_rate = 0;
};

inline Value fc_forward(Graph& g, Value x, const FCLayer& layer, bool training,
                        Rng* rng) {
  Value w = g.param(layer.weight);
  Value b = g.param(layer.bias);
  Value y = dense(g, w, x, b);
  y = activation(g, y, layer.act, /*softmax_axis=*/0);
  if (layer.dropout_rate > 0 && training && rng)
    y = dropout(g, y, layer.dropout_rate, training, *rng);
  return y;
}

}  // namespace eegnet
