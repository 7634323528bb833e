#pragma once

#include <cmath>
#include <utility>

#include "eegnet/graph.hpp"
#include "eegnet/kinds.hpp"
#include "eegnet/rng.hpp"

namespace eegnet {
namespace detail {

// Records a node whose backward closure receives its own handle.
template <class F>
Value make_node(Graph& g, Tensor value, std::vector<int> parents, F&& fn) {
  const int self_id = static_cast<int>(g.size());
  return g.make(std::move(value), std::move(parents),
                [self_id, fn = std::forward<F>(fn)](Graph& gr) {
                  fn(gr, Value{self_id});
                });
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Linear algebra

/// c[m×p] = a[m×n] · b[n×p]; da = g·bᵀ, db = aᵀ·g.
inline Value matmul(Graph& g, Value a, Value b) {
  const Tensor& A = g.val(a);
  const Tensor& B = g.val(b);
  if (A.rank() != 2 || B.rank() != 2)
    throw ShapeError("matmul expects rank-2 operands, got " +
                     shape_str(A.shape) + " and " + shape_str(B.shape));
  const long m = A.shape[0], n = A.shape[1], p = B.shape[1];
  if (B.shape[0] != n)
    throw ShapeError("matmul inner extents disagree: " + shape_str(A.shape) +
                     " vs " + shape_str(B.shape));
  Tensor C(Shape{m, p});
  {
    const Real* pa = A.data.data();
    const Real* pb = B.data.data();
    Real* pc = C.data.data();
    for (long i = 0; i < m; ++i)
      for (long k = 0; k < n; ++k) {
        const Real aik = pa[i * n + k];
        const Real* brow = pb + k * p;
        Real* crow = pc + i * p;
        for (long j = 0; j < p; ++j) crow[j] += aik * brow[j];
      }
  }
  return detail::make_node(
      g, std::move(C), {a.id, b.id}, [a, b, m, n, p](Graph& gr, Value self) {
        const std::vector<Real>& go = gr.grad(self);
        const Real* pg = go.data();
        if (gr.live(a)) {
          const Real* pb = gr.val(b).data.data();
          Real* pda = gr.grad(a).data();
          for (long i = 0; i < m; ++i)
            for (long k = 0; k < n; ++k) {
              const Real* grow = pg + i * p;
              const Real* brow = pb + k * p;
              Real acc = 0;
              for (long j = 0; j < p; ++j) acc += grow[j] * brow[j];
              pda[i * n + k] += acc;
            }
        }
        if (gr.live(b)) {
          const Real* pa = gr.val(a).data.data();
          Real* pdb = gr.grad(b).data();
          for (long i = 0; i < m; ++i)
            for (long k = 0; k < n; ++k) {
              const Real aik = pa[i * n + k];
              const Real* grow = pg + i * p;
              Real* dbrow = pdb + k * p;
              for (long j = 0; j < p; ++j) dbrow[j] += aik * grow[j];
            }
        }
      });
}

/// y[s,t] = x[s,t] + b[s]; broadcasts a column over time.
inline Value add_col(Graph& g, Value x, Value b) {
  const Tensor& X = g.val(x);
  const Tensor& B = g.val(b);
  if (X.rank() != 2 || B.rank() != 1 || B.shape[0] != X.shape[0])
    throw ShapeError("add_col expects [SxT] plus [S], got " +
                     shape_str(X.shape) + " and " + shape_str(B.shape));
  const long S = X.shape[0], T = X.shape[1];
  Tensor Y(X.shape);
  for (long s = 0; s < S; ++s) {
    const Real bs = B.data[static_cast<size_t>(s)];
    for (long t = 0; t < T; ++t) Y.at(s, t) = X.at(s, t) + bs;
  }
  return detail::make_node(g, std::move(Y), {x.id, b.id},
                           [x, b, S, T](Graph& gr, Value self) {
                             const Real* pg = gr.grad(self).data();
                             if (gr.live(x)) {
                               Real* dx = gr.grad(x).data();
                               for (long i = 0; i < S * T; ++i) dx[i] += pg[i];
                             }
                             if (gr.live(b)) {
                               Real* db = gr.grad(b).data();
                               for (long s = 0; s < S; ++s) {
                                 Real acc = 0;
                                 for (long t = 0; t < T; ++t) acc += pg[s * T + t];
                                 db[s] += acc;
                               }
                             }
                           });
}

/// y[m] = W[m×n] · x[n] + b[m].
inline Value dense(Graph& g, Value w, Value x, Value b) {
  const Tensor& W = g.val(w);
  const Tensor& X = g.val(x);
  const Tensor& B = g.val(b);
  if (W.rank() != 2 || X.rank() != 1 || B.rank() != 1)
    throw ShapeError("dense expects W[mxn], x[n], b[m]");
  const long m = W.shape[0], n = W.shape[1];
  if (X.shape[0] != n || B.shape[0] != m)
    throw ShapeError("dense width mismatch: W " + shape_str(W.shape) +
                     ", x " + shape_str(X.shape) + ", b " + shape_str(B.shape));
  Tensor Y(Shape{m});
  for (long i = 0; i < m; ++i) {
    const Real* wrow = W.data.data() + i * n;
    Real acc = B.data[static_cast<size_t>(i)];
    for (long k = 0; k < n; ++k) acc += wrow[k] * X.data[static_cast<size_t>(k)];
    Y.at(i) = acc;
  }
  return detail::make_node(
      g, std::move(Y), {w.id, x.id, b.id}, [w, x, b, m, n](Graph& gr, Value self) {
        const Real* pg = gr.grad(self).data();
        const Real* px = gr.val(x).data.data();
        if (gr.live(w)) {
          Real* dw = gr.grad(w).data();
          for (long i = 0; i < m; ++i) {
            const Real gi = pg[i];
            Real* dwrow = dw + i * n;
            for (long k = 0; k < n; ++k) dwrow[k] += gi * px[k];
          }
        }
        if (gr.live(x)) {
          const Real* pw = gr.val(w).data.data();
          Real* dx = gr.grad(x).data();
          for (long i = 0; i < m; ++i) {
            const Real gi = pg[i];
            const Real* wrow = pw + i * n;
            for (long k = 0; k < n; ++k) dx[k] += gi * wrow[k];
          }
        }
        if (gr.live(b)) {
          Real* db = gr.grad(b).data();
          for (long i = 0; i < m; ++i) db[i] += pg[i];
        }
      });
}

// ---------------------------------------------------------------------------
// Convolution

/// Valid cross-correlation of a 1-d signal with a kernel.
/// Output length is floor((K - k) / stride) + 1.
inline Value conv1d_valid(Graph& g, Value signal, Value kernel, long stride = 1) {
  const Tensor& S = g.val(signal);
  const Tensor& K = g.val(kernel);
  if (S.rank() != 1 || K.rank() != 1)
    throw ShapeError("conv1d_valid expects rank-1 signal and kernel");
  if (stride < 1) throw ConfigError("conv1d_valid stride must be >= 1");
  const long ns = S.shape[0], nk = K.shape[0];
  if (nk > ns)
    throw ShapeError("kernel length " + std::to_string(nk) +
                     " exceeds signal length " + std::to_string(ns));
  const long no = (ns - nk) / stride + 1;
  Tensor Y(Shape{no});
  for (long t = 0; t < no; ++t) {
    Real acc = 0;
    for (long j = 0; j < nk; ++j)
      acc += S.data[static_cast<size_t>(t * stride + j)] *
             K.data[static_cast<size_t>(j)];
    Y.at(t) = acc;
  }
  return detail::make_node(
      g, std::move(Y), {signal.id, kernel.id},
      [signal, kernel, nk, no, stride](Graph& gr, Value self) {
        const Real* pg = gr.grad(self).data();
        const Real* ps = gr.val(signal).data.data();
        const Real* pk = gr.val(kernel).data.data();
        if (gr.live(signal)) {
          Real* ds = gr.grad(signal).data();
          for (long t = 0; t < no; ++t)
            for (long j = 0; j < nk; ++j) ds[t * stride + j] += pg[t] * pk[j];
        }
        if (gr.live(kernel)) {
          Real* dk = gr.grad(kernel).data();
          for (long t = 0; t < no; ++t)
            for (long j = 0; j < nk; ++j) dk[j] += pg[t] * ps[t * stride + j];
        }
      });
}

/// Bank convolution of every space row with every kernel (valid, stride 1):
/// x[S×T] ⊛ kernels[C×k] + bias[C] -> y[S×C×(T-k+1)]. Linear part only;
/// the activation is a separate node.
inline Value sdc_conv(Graph& g, Value x, Value kernels, Value bias) {
  const Tensor& X = g.val(x);
  const Tensor& K = g.val(kernels);
  const Tensor& B = g.val(bias);
  if (X.rank() != 2 || K.rank() != 2 || B.rank() != 1)
    throw ShapeError("sdc_conv expects x[SxT], kernels[Cxk], bias[C]");
  const long S = X.shape[0], T = X.shape[1];
  const long C = K.shape[0], k = K.shape[1];
  if (B.shape[0] != C) throw ShapeError("sdc_conv bias width mismatch");
  if (k > T)
    throw ShapeError("sdc_conv kernel length " + std::to_string(k) +
                     " exceeds time extent " + std::to_string(T));
  const long To = T - k + 1;
  Tensor Y(Shape{S, C, To});
  {
    const Real* px = X.data.data();
    const Real* pk = K.data.data();
    Real* py = Y.data.data();
    for (long s = 0; s < S; ++s) {
      const Real* xrow = px + s * T;
      for (long c = 0; c < C; ++c) {
        Real* yrow = py + (s * C + c) * To;
        const Real bc = B.data[static_cast<size_t>(c)];
        for (long t = 0; t < To; ++t) yrow[t] = bc;
        const Real* krow = pk + c * k;
        for (long j = 0; j < k; ++j) {
          const Real kj = krow[j];
          const Real* xs = xrow + j;
          for (long t = 0; t < To; ++t) yrow[t] += kj * xs[t];
        }
      }
    }
  }
  return detail::make_node(
      g, std::move(Y), {x.id, kernels.id, bias.id},
      [x, kernels, bias, S, T, C, k, To](Graph& gr, Value self) {
        const Real* pg = gr.grad(self).data();
        const Real* px = gr.val(x).data.data();
        const Real* pk = gr.val(kernels).data.data();
        if (gr.live(x)) {
          Real* dx = gr.grad(x).data();
          for (long s = 0; s < S; ++s)
            for (long c = 0; c < C; ++c) {
              const Real* grow = pg + (s * C + c) * To;
              const Real* krow = pk + c * k;
              Real* dxrow = dx + s * T;
              for (long j = 0; j < k; ++j) {
                const Real kj = krow[j];
                Real* dxs = dxrow + j;
                for (long t = 0; t < To; ++t) dxs[t] += kj * grow[t];
              }
            }
        }
        if (gr.live(kernels)) {
          Real* dk = gr.grad(kernels).data();
          for (long s = 0; s < S; ++s) {
            const Real* xrow = px + s * T;
            for (long c = 0; c < C; ++c) {
              const Real* grow = pg + (s * C + c) * To;
              Real* dkrow = dk + c * k;
              for (long j = 0; j < k; ++j) {
                const Real* xs = xrow + j;
                Real acc = 0;
                for (long t = 0; t < To; ++t) acc += grow[t] * xs[t];
                dkrow[j] += acc;
              }
            }
          }
        }
        if (gr.live(bias)) {
          Real* db = gr.grad(bias).data();
          for (long s = 0; s < S; ++s)
            for (long c = 0; c < C; ++c) {
              const Real* grow = pg + (s * C + c) * To;
              Real acc = 0;
              for (long t = 0; t < To; ++t) acc += grow[t];
              db[c] += acc;
            }
        }
      });
}

/// Time-distributed valid 2-d convolution over a mesh sequence:
/// x[Ci×H×W×T] ⊛ ker[Co×Ci×kh×kw] + bias[Co] -> y[Co×Ho×Wo×T].
inline Value conv2d_td(Graph& g, Value x, Value ker, Value bias, long stride) {
  const Tensor& X = g.val(x);
  const Tensor& K = g.val(ker);
  const Tensor& B = g.val(bias);
  if (X.rank() != 4 || K.rank() != 4 || B.rank() != 1)
    throw ShapeError("conv2d_td expects x[CixHxWxT], ker[CoxCixKhxKw], bias[Co]");
  if (stride < 1) throw ConfigError("conv2d_td stride must be >= 1");
  const long Ci = X.shape[0], H = X.shape[1], W = X.shape[2], T = X.shape[3];
  const long Co = K.shape[0], kh = K.shape[2], kw = K.shape[3];
  if (K.shape[1] != Ci) throw ShapeError("conv2d_td channel mismatch");
  if (B.shape[0] != Co) throw ShapeError("conv2d_td bias width mismatch");
  if (kh > H || kw > W)
    throw ShapeError("conv2d_td kernel " + std::to_string(kh) + "x" +
                     std::to_string(kw) + " exceeds mesh " + std::to_string(H) +
                     "x" + std::to_string(W));
  const long Ho = (H - kh) / stride + 1;
  const long Wo = (W - kw) / stride + 1;
  Tensor Y(Shape{Co, Ho, Wo, T});
  {
    const Real* px = X.data.data();
    const Real* pk = K.data.data();
    Real* py = Y.data.data();
    for (long o = 0; o < Co; ++o)
      for (long i = 0; i < Ho; ++i)
        for (long j = 0; j < Wo; ++j) {
          Real* yrow = py + ((o * Ho + i) * Wo + j) * T;
          const Real bo = B.data[static_cast<size_t>(o)];
          for (long t = 0; t < T; ++t) yrow[t] = bo;
          for (long c = 0; c < Ci; ++c)
            for (long a = 0; a < kh; ++a)
              for (long b2 = 0; b2 < kw; ++b2) {
                const Real wv = pk[((o * Ci + c) * kh + a) * kw + b2];
                const Real* xrow =
                    px + ((c * H + i * stride + a) * W + j * stride + b2) * T;
                for (long t = 0; t < T; ++t) yrow[t] += wv * xrow[t];
              }
        }
  }
  return detail::make_node(
      g, std::move(Y), {x.id, ker.id, bias.id},
      [x, ker, bias, Ci, H, W, T, Co, kh, kw, Ho, Wo,
       stride](Graph& gr, Value self) {
        const Real* pg = gr.grad(self).data();
        const Real* px = gr.val(x).data.data();
        const Real* pk = gr.val(ker).data.data();
        for (long o = 0; o < Co; ++o)
          for (long i = 0; i < Ho; ++i)
            for (long j = 0; j < Wo; ++j) {
              const Real* grow = pg + ((o * Ho + i) * Wo + j) * T;
              if (gr.live(bias)) {
                Real acc = 0;
                for (long t = 0; t < T; ++t) acc += grow[t];
                gr.grad(bias)[static_cast<size_t>(o)] += acc;
              }
              for (long c = 0; c < Ci; ++c)
                for (long a = 0; a < kh; ++a)
                  for (long b2 = 0; b2 < kw; ++b2) {
                    const long xoff =
                        ((c * H + i * stride + a) * W + j * stride + b2) * T;
                    const long koff = ((o * Ci + c) * kh + a) * kw + b2;
                    if (gr.live(x)) {
                      const Real wv = pk[koff];
                      Real* dxrow = gr.grad(x).data() + xoff;
                      for (long t = 0; t < T; ++t) dxrow[t] += wv * grow[t];
                    }
                    if (gr.live(ker)) {
                      const Real* xrow = px + xoff;
                      Real acc = 0;
                      for (long t = 0; t < T; ++t) acc += grow[t] * xrow[t];
                      gr.grad(ker)[static_cast<size_t>(koff)] += acc;
                    }
                  }
            }
      });
}

// ---------------------------------------------------------------------------
// Activations

/// Softmax along one axis; every slice sums to 1.
inline Value softmax(Graph& g, Value x, int axis) {
  const Tensor& X = g.val(x);
  if (axis < 0 || axis >= X.rank())
    throw ShapeError("softmax axis out of range for " + shape_str(X.shape));
  const long n = X.shape[static_cast<size_t>(axis)];
  long inner = 1, outer = 1;
  for (int d = axis + 1; d < X.rank(); ++d) inner *= X.shape[static_cast<size_t>(d)];
  for (int d = 0; d < axis; ++d) outer *= X.shape[static_cast<size_t>(d)];
  Tensor Y(X.shape);
  for (long ou = 0; ou < outer; ++ou)
    for (long in = 0; in < inner; ++in) {
      const long base = ou * n * inner + in;
      Real m = X.data[static_cast<size_t>(base)];
      for (long c = 1; c < n; ++c)
        m = std::max(m, X.data[static_cast<size_t>(base + c * inner)]);
      Real z = 0;
      for (long c = 0; c < n; ++c) {
        const Real e = std::exp(X.data[static_cast<size_t>(base + c * inner)] - m);
        Y.data[static_cast<size_t>(base + c * inner)] = e;
        z += e;
      }
      for (long c = 0; c < n; ++c)
        Y.data[static_cast<size_t>(base + c * inner)] /= z;
    }
  return detail::make_node(
      g, std::move(Y), {x.id}, [x, n, inner, outer](Graph& gr, Value self) {
        if (!gr.live(x)) return;
        const Real* pg = gr.grad(self).data();
        const Real* ps = gr.val(self).data.data();
        Real* dx = gr.grad(x).data();
        for (long ou = 0; ou < outer; ++ou)
          for (long in = 0; in < inner; ++in) {
            const long base = ou * n * inner + in;
            Real dot = 0;
            for (long c = 0; c < n; ++c)
              dot += pg[base + c * inner] * ps[base + c * inner];
            for (long c = 0; c < n; ++c)
              dx[base + c * inner] +=
                  ps[base + c * inner] * (pg[base + c * inner] - dot);
          }
      });
}

/// Elementwise relu/elu/selu, or softmax along `softmax_axis`. Linear is the
/// identity and records nothing.
inline Value activation(Graph& g, Value x, Activation kind, int softmax_axis = 0) {
  if (kind == Activation::Linear) return x;
  if (kind == Activation::Softmax) return softmax(g, x, softmax_axis);
  const Tensor& X = g.val(x);
  Tensor Y(X.shape);
  const size_t N = X.data.size();
  switch (kind) {
    case Activation::Relu:
      for (size_t i = 0; i < N; ++i) Y.data[i] = X.data[i] > 0 ? X.data[i] : 0;
      break;
    case Activation::Elu:
      for (size_t i = 0; i < N; ++i)
        Y.data[i] = X.data[i] > 0 ? X.data[i] : std::expm1(X.data[i]);
      break;
    case Activation::Selu:
      for (size_t i = 0; i < N; ++i)
        Y.data[i] = X.data[i] > 0 ? kSeluLambda * X.data[i]
                                  : kSeluLambda * kSeluAlpha * std::expm1(X.data[i]);
      break;
    default:
      throw ConfigError("unknown activation kind");
  }
  return detail::make_node(
      g, std::move(Y), {x.id}, [x, kind, N](Graph& gr, Value self) {
        if (!gr.live(x)) return;
        const Real* pg = gr.grad(self).data();
        const Real* px = gr.val(x).data.data();
        const Real* py = gr.val(self).data.data();
        Real* dx = gr.grad(x).data();
        switch (kind) {
          case Activation::Relu:
            for (size_t i = 0; i < N; ++i)
              if (px[i] > 0) dx[i] += pg[i];
            break;
          case Activation::Elu:
            // d/dx = 1 for x>0, e^x = y+1 otherwise
            for (size_t i = 0; i < N; ++i)
              dx[i] += pg[i] * (px[i] > 0 ? Real(1) : py[i] + Real(1));
            break;
          case Activation::Selu:
            for (size_t i = 0; i < N; ++i)
              dx[i] += pg[i] * (px[i] > 0 ? kSeluLambda
                                          : py[i] + kSeluLambda * kSeluAlpha);
            break;
          default:
            break;
        }
      });
}

// ---------------------------------------------------------------------------
// Pooling and reshaping

/// Non-overlapping pooling along the last (time) axis; a trailing remainder
/// shorter than the window is dropped.
inline Value time_pool(Graph& g, Value x, long window, PoolKind kind) {
  const Tensor& X = g.val(x);
  if (window < 1) throw ConfigError("time_pool window must be >= 1");
  if (X.rank() < 1) throw ShapeError("time_pool expects rank >= 1");
  const long T = X.shape.back();
  const long To = T / window;
  if (To == 0)
    throw ShapeError("time_pool would be empty: time extent " +
                     std::to_string(T) + " shorter than window " +
                     std::to_string(window));
  const long rows = numel(X.shape) / T;
  Shape oshape = X.shape;
  oshape.back() = To;
  Tensor Y(oshape);
  std::vector<long> argmax;
  if (kind == PoolKind::Max) argmax.resize(static_cast<size_t>(rows * To));
  for (long r = 0; r < rows; ++r) {
    const Real* xrow = X.data.data() + r * T;
    Real* yrow = Y.data.data() + r * To;
    for (long t = 0; t < To; ++t) {
      const long start = t * window;
      if (kind == PoolKind::Max) {
        long best = start;
        Real bv = xrow[start];
        for (long j = 1; j < window; ++j)
          if (xrow[start + j] > bv) {
            bv = xrow[start + j];
            best = start + j;
          }
        yrow[t] = bv;
        argmax[static_cast<size_t>(r * To + t)] = best;
      } else {
        Real acc = 0;
        for (long j = 0; j < window; ++j) acc += xrow[start + j];
        yrow[t] = acc / static_cast<Real>(window);
      }
    }
  }
  return detail::make_node(
      g, std::move(Y), {x.id},
      [x, window, kind, T, To, rows, argmax = std::move(argmax)](Graph& gr,
                                                                 Value self) {
        if (!gr.live(x)) return;
        const Real* pg = gr.grad(self).data();
        Real* dx = gr.grad(x).data();
        if (kind == PoolKind::Max) {
          for (long r = 0; r < rows; ++r)
            for (long t = 0; t < To; ++t)
              dx[r * T + argmax[static_cast<size_t>(r * To + t)]] +=
                  pg[r * To + t];
        } else {
          const Real inv = Real(1) / static_cast<Real>(window);
          for (long r = 0; r < rows; ++r)
            for (long t = 0; t < To; ++t) {
              const Real gv = pg[r * To + t] * inv;
              for (long j = 0; j < window; ++j)
                dx[r * T + t * window + j] += gv;
            }
        }
      });
}

/// Pure reshape; gradient is the inverse reshape.
inline Value reshape(Graph& g, Value x, Shape target) {
  const Tensor& X = g.val(x);
  if (numel(target) != numel(X.shape))
    throw ShapeError("reshape cannot map " + shape_str(X.shape) + " to " +
                     shape_str(target));
  Tensor Y(std::move(target), X.data);
  return detail::make_node(g, std::move(Y), {x.id},
                           [x](Graph& gr, Value self) {
                             if (!gr.live(x)) return;
                             const std::vector<Real>& go = gr.grad(self);
                             std::vector<Real>& dx = gr.grad(x);
                             for (size_t i = 0; i < go.size(); ++i) dx[i] += go[i];
                           });
}

/// Merges the first two axes of a rank-3 array: [a×b×T] -> [(a·b)×T].
inline Value flatten_space(Graph& g, Value x) {
  const Tensor& X = g.val(x);
  if (X.rank() != 3)
    throw ShapeError("flatten_space expects a rank-3 input, got " +
                     shape_str(X.shape));
  return reshape(g, x, Shape{X.shape[0] * X.shape[1], X.shape[2]});
}

/// Mean over the time (last) axis: [F×T] -> [F].
inline Value global_average_pool(Graph& g, Value x) {
  const Tensor& X = g.val(x);
  if (X.rank() < 2) throw ShapeError("global_average_pool expects rank >= 2");
  const long T = X.shape.back();
  const long rows = numel(X.shape) / T;
  Shape oshape(X.shape.begin(), X.shape.end() - 1);
  Tensor Y(oshape);
  for (long r = 0; r < rows; ++r) {
    const Real* xrow = X.data.data() + r * T;
    Real acc = 0;
    for (long t = 0; t < T; ++t) acc += xrow[t];
    Y.data[static_cast<size_t>(r)] = acc / static_cast<Real>(T);
  }
  return detail::make_node(g, std::move(Y), {x.id},
                           [x, T, rows](Graph& gr, Value self) {
                             if (!gr.live(x)) return;
                             const Real* pg = gr.grad(self).data();
                             Real* dx = gr.grad(x).data();
                             const Real inv = Real(1) / static_cast<Real>(T);
                             for (long r = 0; r < rows; ++r) {
                               const Real gv = pg[r] * inv;
                               for (long t = 0; t < T; ++t) dx[r * T + t] += gv;
                             }
                           });
}

// ---------------------------------------------------------------------------
// Regularization and glue

/// Inverted dropout: zeroes units with probability `rate` during training and
/// scales survivors by 1/(1-rate). Identity (no node) in eval mode.
inline Value dropout(Graph& g, Value x, Real rate, bool training, Rng& rng) {
  if (rate < 0 || rate >= 1)
    throw ConfigError("dropout rate must lie in [0, 1)");
  if (!training || rate == 0) return x;
  const Tensor& X = g.val(x);
  const size_t N = X.data.size();
  std::vector<Real> mask(N);
  const Real keep = Real(1) - rate;
  const Real scl = Real(1) / keep;
  for (size_t i = 0; i < N; ++i)
    mask[i] = rng.uniform(Real(0), Real(1)) < rate ? Real(0) : scl;
  Tensor Y(X.shape);
  for (size_t i = 0; i < N; ++i) Y.data[i] = X.data[i] * mask[i];
  return detail::make_node(g, std::move(Y), {x.id},
                           [x, mask = std::move(mask)](Graph& gr, Value self) {
                             if (!gr.live(x)) return;
                             const std::vector<Real>& go = gr.grad(self);
                             std::vector<Real>& dx = gr.grad(x);
                             for (size_t i = 0; i < go.size(); ++i)
                               dx[i] += go[i] * mask[i];
                           });
}

/// Concatenation of two vectors.
inline Value concat(Graph& g, Value a, Value b) {
  const Tensor& A = g.val(a);
  const Tensor& B = g.val(b);
  if (A.rank() != 1 || B.rank() != 1)
    throw ShapeError("concat expects rank-1 operands");
  const long na = A.shape[0], nb = B.shape[0];
  Tensor Y(Shape{na + nb});
  std::copy(A.data.begin(), A.data.end(), Y.data.begin());
  std::copy(B.data.begin(), B.data.end(), Y.data.begin() + na);
  return detail::make_node(g, std::move(Y), {a.id, b.id},
                           [a, b, na, nb](Graph& gr, Value self) {
                             const Real* pg = gr.grad(self).data();
                             if (gr.live(a)) {
                               Real* da = gr.grad(a).data();
                               for (long i = 0; i < na; ++i) da[i] += pg[i];
                             }
                             if (gr.live(b)) {
                               Real* db = gr.grad(b).data();
                               for (long i = 0; i < nb; ++i) db[i] += pg[na + i];
                             }
                           });
}

inline Value add(Graph& g, Value a, Value b) {
  const Tensor& A = g.val(a);
  const Tensor& B = g.val(b);
  if (A.shape != B.shape)
    throw ShapeError("add expects equal shapes, got " + shape_str(A.shape) +
                     " and " + shape_str(B.shape));
  Tensor Y(A.shape);
  for (size_t i = 0; i < A.data.size(); ++i) Y.data[i] = A.data[i] + B.data[i];
  return detail::make_node(g, std::move(Y), {a.id, b.id},
                           [a, b](Graph& gr, Value self) {
                             const std::vector<Real>& go = gr.grad(self);
                             if (gr.live(a)) {
                               std::vector<Real>& da = gr.grad(a);
                               for (size_t i = 0; i < go.size(); ++i) da[i] += go[i];
                             }
                             if (gr.live(b)) {
                               std::vector<Real>& db = gr.grad(b);
                               for (size_t i = 0; i < go.size(); ++i) db[i] += go[i];
                             }
                           });
}

inline Value mul(Graph& g, Value a, Value b) {
  const Tensor& A = g.val(a);
  const Tensor& B = g.val(b);
  if (A.shape != B.shape)
    throw ShapeError("mul expects equal shapes, got " + shape_str(A.shape) +
                     " and " + shape_str(B.shape));
  Tensor Y(A.shape);
  for (size_t i = 0; i < A.data.size(); ++i) Y.data[i] = A.data[i] * B.data[i];
  return detail::make_node(
      g, std::move(Y), {a.id, b.id}, [a, b](Graph& gr, Value self) {
        const std::vector<Real>& go = gr.grad(self);
        if (gr.live(a)) {
          const std::vector<Real>& vb = gr.val(b).data;
          std::vector<Real>& da = gr.grad(a);
          for (size_t i = 0; i < go.size(); ++i) da[i] += go[i] * vb[i];
        }
        if (gr.live(b)) {
          const std::vector<Real>& va = gr.val(a).data;
          std::vector<Real>& db = gr.grad(b);
          for (size_t i = 0; i < go.size(); ++i) db[i] += go[i] * va[i];
        }
      });
}

inline Value scale(Graph& g, Value x, Real c) {
  const Tensor& X = g.val(x);
  Tensor Y(X.shape);
  for (size_t i = 0; i < X.data.size(); ++i) Y.data[i] = X.data[i] * c;
  return detail::make_node(g, std::move(Y), {x.id},
                           [x, c](Graph& gr, Value self) {
                             if (!gr.live(x)) return;
                             const std::vector<Real>& go = gr.grad(self);
                             std::vector<Real>& dx = gr.grad(x);
                             for (size_t i = 0; i < go.size(); ++i)
                               dx[i] += go[i] * c;
                           });
}

/// Sum of all entries; the workhorse for scalar test losses.
inline Value sum(Graph& g, Value x) {
  const Tensor& X = g.val(x);
  Real acc = 0;
  for (Real v : X.data) acc += v;
  return detail::make_node(g, Tensor::scalar(acc), {x.id},
                           [x](Graph& gr, Value self) {
                             if (!gr.live(x)) return;
                             const Real gv = gr.grad(self)[0];
                             std::vector<Real>& dx = gr.grad(x);
                             for (Real& d : dx) d += gv;
                           });
}

// ---------------------------------------------------------------------------
// Loss

/// Cross entropy of a softmax distribution over logits, fused in log space:
/// loss = logsumexp(z) - z[label]; dz = softmax(z) - onehot(label).
inline Value cross_entropy(Graph& g, Value logits, int label) {
  const Tensor& Z = g.val(logits);
  if (Z.rank() != 1)
    throw ShapeError("cross_entropy expects rank-1 logits, got " +
                     shape_str(Z.shape));
  const long n = Z.shape[0];
  if (label < 0 || label >= n)
    throw DataError("class label " + std::to_string(label) +
                    " outside 0.." + std::to_string(n - 1));
  Real m = Z.data[0];
  for (Real v : Z.data) m = std::max(m, v);
  Real z = 0;
  std::vector<Real> probs(static_cast<size_t>(n));
  for (long c = 0; c < n; ++c) {
    probs[static_cast<size_t>(c)] = std::exp(Z.data[static_cast<size_t>(c)] - m);
    z += probs[static_cast<size_t>(c)];
  }
  for (long c = 0; c < n; ++c) probs[static_cast<size_t>(c)] /= z;
  const Real loss = std::log(z) + m - Z.data[static_cast<size_t>(label)];
  return detail::make_node(
      g, Tensor::scalar(loss), {logits.id},
      [logits, label, n, probs = std::move(probs)](Graph& gr, Value self) {
        if (!gr.live(logits)) return;
        const Real gv = gr.grad(self)[0];
        Real* dz = gr.grad(logits).data();
        for (long c = 0; c < n; ++c)
          dz[c] += gv * (probs[static_cast<size_t>(c)] -
                         (c == label ? Real(1) : Real(0)));
      });
}

/// -log p_label on an explicit probability vector (reporting/tests).
inline Real cross_entropy_probs(const std::vector<Real>& probs, int label) {
  if (label < 0 || static_cast<size_t>(label) >= probs.size())
    throw DataError("class label outside probability vector");
  return -std::log(probs[static_cast<size_t>(label)]);
}

inline Real scalar_value(const Graph& g, Value v) {
  const Tensor& t = g.val(v);
  if (!t.is_scalar()) throw ShapeError("expected scalar value");
  return t.data[0];
}

}  // namespace eegnet
