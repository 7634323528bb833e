#pragma once

#include "eegnet/config.hpp"
#include "eegnet/layers.hpp"
#include "eegnet/mesh.hpp"

namespace eegnet {

// ---------------------------------------------------------------------------
// Shape planning

struct ShapeStep {
  std::string name;
  Shape in;
  Shape out;
};

/// Symbolic shape propagation through every stage, derived before any
/// parameter allocation.
struct ShapePlan {
  std::vector<ShapeStep> steps;

  const Shape& final_shape() const { return steps.back().out; }

  std::string pretty() const {
    std::string s = shape_str(steps.front().in);
    for (const ShapeStep& st : steps) {
      s += " -> ";
      s += shape_str(st.out);
      s += " (" + st.name + ")";
    }
    return s;
  }
};

using ShapeTrace = std::vector<std::pair<std::string, Shape>>;

namespace detail {

inline void plan_tail(const HyperConfig& c, ShapePlan& plan, Shape cur) {
  const std::vector<long> ls = c.ls_effective();
  if (!ls.empty()) {
    for (size_t j = 0; j < ls.size(); ++j) {
      const bool last = (j + 1 == ls.size());
      Shape out = last ? Shape{ls[j]} : Shape{ls[j], cur[1]};
      plan.steps.push_back({"lstm" + std::to_string(j), cur, out});
      cur = out;
    }
  } else {
    plan.steps.push_back({"global_average_pool", cur, Shape{cur[0]}});
    cur = Shape{cur[0]};
  }
  const std::vector<long> fc = c.fc_effective();
  for (size_t j = 0; j < fc.size(); ++j) {
    Shape out{fc[j]};
    plan.steps.push_back({"fc" + std::to_string(j), cur, out});
    cur = out;
  }
  plan.steps.push_back({"head", cur, Shape{kNumClasses}});
}

inline void plan_conv_stack(const HyperConfig& c, const Mesh& mesh,
                            ShapePlan& plan, Shape& cur,
                            const std::string& prefix) {
  for (long i = 0; i < c.conv_layers; ++i) {
    const long H = cur[1], W = cur[2];
    if (c.conv_size > H || c.conv_size > W)
      throw ConfigError("infeasible configuration: " + prefix + "conv" +
                        std::to_string(i) + ": kernel " +
                        std::to_string(c.conv_size) + " exceeds mesh " +
                        std::to_string(H) + "x" + std::to_string(W));
    const long Ho = (H - c.conv_size) / c.conv_stride + 1;
    const long Wo = (W - c.conv_size) / c.conv_stride + 1;
    Shape out{c.conv_num, Ho, Wo, cur[3]};
    plan.steps.push_back({prefix + "conv" + std::to_string(i), cur, out});
    cur = out;
  }
  Shape flat{cur[0] * cur[1] * cur[2], cur[3]};
  plan.steps.push_back({prefix + "conv_flatten", cur, flat});
  cur = flat;
  (void)mesh;
}

}  // namespace detail

/// Derives the full chain of intermediate shapes for a configuration on an
/// input of `rows` electrodes by `cols` samples. Throws ConfigError naming
/// the offending module when a time extent collapses.
inline ShapePlan plan_shapes(const HyperConfig& c, long rows = 19,
                             long cols = 200) {
  c.validate();
  ShapePlan plan;
  Shape cur{rows, cols};

  if (c.family == Family::Intertwined) {
    plan.steps.push_back({"flatten", cur, cur});
    for (int i = 0; i < c.mod_num; ++i) {
      const long S = cur[0], T = cur[1];
      const long outf = c.tdfc_num[static_cast<size_t>(i)];
      const long C = c.sdc_num[static_cast<size_t>(i)];
      const long k = c.sdc_ker[static_cast<size_t>(i)];
      const std::string mod = "module" + std::to_string(i);
      plan.steps.push_back({mod + ".tdfc", cur, Shape{outf, T}});
      if (k > T)
        throw ConfigError("infeasible configuration: module " +
                          std::to_string(i) + ": kernel " + std::to_string(k) +
                          " exceeds time extent " + std::to_string(T));
      const long Tc = T - k + 1;
      plan.steps.push_back({mod + ".sdc", Shape{outf, T}, Shape{outf, C, Tc}});
      const long Tp = Tc / c.pool_size;
      if (Tp == 0)
        throw ConfigError("infeasible configuration: module " +
                          std::to_string(i) + ": pooling " +
                          std::to_string(Tc) + " samples by " +
                          std::to_string(c.pool_size) + " empties the time axis");
      plan.steps.push_back({mod + ".pool", Shape{outf, C, Tc}, Shape{outf, C, Tp}});
      plan.steps.push_back({mod + ".flatten", Shape{outf, C, Tp}, Shape{outf * C, Tp}});
      cur = Shape{outf * C, Tp};
      (void)S;
    }
    detail::plan_tail(c, plan, cur);
    return plan;
  }

  const Mesh mesh = Mesh::from_id(c.mesh_id);
  if (mesh.channels() != rows)
    throw ConfigError("mesh '" + c.mesh_id + "' maps " +
                      std::to_string(mesh.channels()) +
                      " electrodes, dataset has " + std::to_string(rows));

  if (c.family == Family::Cascade) {
    Shape m{1, mesh.rows, mesh.cols, cols};
    plan.steps.push_back({"mesh_embed", cur, m});
    cur = m;
    detail::plan_conv_stack(c, mesh, plan, cur, "");
    // time-distributed FC tail on the latent sequence
    const std::vector<long> fc = c.fc_effective();
    for (size_t j = 0; j < fc.size(); ++j) {
      Shape out{fc[j], cur[1]};
      plan.steps.push_back({"conv_fc" + std::to_string(j), cur, out});
      cur = out;
    }
    detail::plan_tail(c, plan, cur);
    return plan;
  }

  // parallel: CNN branch and LSTM branch merged by dense layers
  {
    Shape m{1, mesh.rows, mesh.cols, cols};
    plan.steps.push_back({"cnn.mesh_embed", cur, m});
    Shape cnn = m;
    detail::plan_conv_stack(c, mesh, plan, cnn, "cnn.");
    plan.steps.push_back({"cnn.time_average", cnn, Shape{cnn[0]}});
    Shape cnn_out{cnn[0]};

    Shape rec = cur;
    const std::vector<long> ls = c.ls_effective();
    if (!ls.empty()) {
      for (size_t j = 0; j < ls.size(); ++j) {
        const bool last = (j + 1 == ls.size());
        Shape out = last ? Shape{ls[j]} : Shape{ls[j], rec[1]};
        plan.steps.push_back({"lstm.lstm" + std::to_string(j), rec, out});
        rec = out;
      }
    } else {
      plan.steps.push_back({"lstm.time_average", rec, Shape{rec[0]}});
      rec = Shape{rec[0]};
    }

    Shape merged{cnn_out[0] + rec[0]};
    plan.steps.push_back({"concat", merged, merged});
    Shape curv = merged;
    const std::vector<long> fc = c.fc_effective();
    for (size_t j = 0; j < fc.size(); ++j) {
      Shape out{fc[j]};
      plan.steps.push_back({"fc" + std::to_string(j), curv, out});
      curv = out;
    }
    plan.steps.push_back({"head", curv, Shape{kNumClasses}});
    return plan;
  }
}

// ---------------------------------------------------------------------------
// Mesh embedding op (baselines)

inline Value mesh_embed(Graph& g, Value x, const Mesh& mesh) {
  const Tensor& X = g.val(x);
  if (X.rank() != 2)
    throw ShapeError("mesh_embed expects a rank-2 trial, got " +
                     shape_str(X.shape));
  const long L = X.shape[0], K = X.shape[1];
  if (L != mesh.channels())
    throw ConfigError("mesh maps " + std::to_string(mesh.channels()) +
                      " electrodes, trial has " + std::to_string(L));
  Tensor Y(Shape{1, mesh.rows, mesh.cols, K});
  for (long ch = 0; ch < L; ++ch) {
    const auto [r, c] = mesh.positions[static_cast<size_t>(ch)];
    Real* dst = Y.data.data() + (r * mesh.cols + c) * K;
    const Real* src = X.data.data() + ch * K;
    std::copy(src, src + K, dst);
  }
  const long mcols = mesh.cols;
  auto pos = mesh.positions;
  return detail::make_node(g, std::move(Y), {x.id},
                           [x, K, mcols, pos = std::move(pos)](Graph& gr,
                                                               Value self) {
                             if (!gr.live(x)) return;
                             const Real* pg = gr.grad(self).data();
                             Real* dx = gr.grad(x).data();
                             for (size_t ch = 0; ch < pos.size(); ++ch) {
                               const auto [r, c] = pos[ch];
                               const Real* grow = pg + (r * mcols + c) * K;
                               Real* drow = dx + static_cast<long>(ch) * K;
                               for (long t = 0; t < K; ++t) drow[t] += grow[t];
                             }
                           });
}

struct Conv2dLayer {
  Tensor* kernels = nullptr;  // [Co x Ci x k x k]
  Tensor* bias = nullptr;     // [Co]
  long stride = 1;
  Activation act = Activation::Relu;
};

inline Value conv2d_forward(Graph& g, Value x, const Conv2dLayer& layer) {
  Value k = g.param(layer.kernels);
  Value b = g.param(layer.bias);
  Value y = conv2d_td(g, x, k, b, layer.stride);
  return activation(g, y, layer.act, /*softmax_axis=*/0);
}

// ---------------------------------------------------------------------------
// Model

/// A complete classifier assembled from a HyperConfig: layer list, parameter
/// store and the derived shape plan. Forward output is always 6 logits.
struct Model {
  HyperConfig config;
  long input_rows = 19;
  long input_cols = 200;
  uint64_t seed = 0;
  ShapePlan plan;
  Mesh mesh;
  ParamStore params;

  std::vector<IntertwinedModule> modules;
  std::vector<Conv2dLayer> conv_stack;
  std::vector<TdFCLayer> conv_tail;
  std::vector<LSTMLayer> lstm_stack;
  std::vector<FCLayer> fc_stack;
  FCLayer head;

  Model() = default;
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  long parameter_count() const { return params.total_elements(); }

  Value forward(Graph& g, const Tensor& trial, bool training = false,
                Rng* rng = nullptr, ShapeTrace* trace = nullptr) const {
    if (trial.rank() != 2 || trial.shape[0] != input_rows ||
        trial.shape[1] != input_cols)
      throw ShapeError("trial shape " + shape_str(trial.shape) +
                       " does not match model input " +
                       std::to_string(input_rows) + "x" +
                       std::to_string(input_cols));
    auto rec = [&](const std::string& name, Value v) {
      if (trace) trace->emplace_back(name, g.shape(v));
    };
    Value x = g.input(trial);

    if (config.family == Family::Intertwined) {
      rec("flatten", x);
      Value y = x;
      for (size_t i = 0; i < modules.size(); ++i) {
        const std::string mod = "module" + std::to_string(i);
        try {
          y = tdfc_forward(g, y, modules[i].tdfc);
          rec(mod + ".tdfc", y);
          y = sdc_forward(g, y, modules[i].sdc);
          rec(mod + ".sdc", y);
          y = time_pool(g, y, modules[i].pool_size, modules[i].pool_kind);
          rec(mod + ".pool", y);
          y = flatten_space(g, y);
          rec(mod + ".flatten", y);
        } catch (const ShapeError& e) {
          throw ShapeError("module " + std::to_string(i) + ": " + e.what());
        }
      }
      y = forward_tail(g, y, training, rng, rec);
      return y;
    }

    if (config.family == Family::Cascade) {
      Value y = mesh_embed(g, x, mesh);
      rec("mesh_embed", y);
      for (size_t i = 0; i < conv_stack.size(); ++i) {
        y = conv2d_forward(g, y, conv_stack[i]);
        rec("conv" + std::to_string(i), y);
      }
      const Shape& s = g.shape(y);
      y = reshape(g, y, Shape{s[0] * s[1] * s[2], s[3]});
      rec("conv_flatten", y);
      for (size_t j = 0; j < conv_tail.size(); ++j) {
        y = tdfc_forward(g, y, conv_tail[j]);
        if (config.fc_drop > 0 && training && rng)
          y = dropout(g, y, config.fc_drop, training, *rng);
        rec("conv_fc" + std::to_string(j), y);
      }
      y = forward_tail(g, y, training, rng, rec);
      return y;
    }

    // parallel
    Value cnn = mesh_embed(g, x, mesh);
    rec("cnn.mesh_embed", cnn);
    for (size_t i = 0; i < conv_stack.size(); ++i) {
      cnn = conv2d_forward(g, cnn, conv_stack[i]);
      rec("cnn.conv" + std::to_string(i), cnn);
    }
    {
      const Shape& s = g.shape(cnn);
      cnn = reshape(g, cnn, Shape{s[0] * s[1] * s[2], s[3]});
      rec("cnn.conv_flatten", cnn);
      cnn = global_average_pool(g, cnn);
      rec("cnn.time_average", cnn);
    }
    Value rec_branch = x;
    if (!lstm_stack.empty()) {
      for (size_t j = 0; j < lstm_stack.size(); ++j) {
        const bool last = (j + 1 == lstm_stack.size());
        rec_branch = lstm_layer_forward(g, rec_branch, lstm_stack[j], last);
        if (!last && config.ls_drop > 0 && training && rng)
          rec_branch = dropout(g, rec_branch, config.ls_drop, training, *rng);
        rec("lstm.lstm" + std::to_string(j), rec_branch);
      }
    } else {
      rec_branch = global_average_pool(g, rec_branch);
      rec("lstm.time_average", rec_branch);
    }
    Value merged = concat(g, cnn, rec_branch);
    rec("concat", merged);
    Value y = merged;
    for (size_t j = 0; j < fc_stack.size(); ++j) {
      y = fc_forward(g, y, fc_stack[j], training, rng);
      rec("fc" + std::to_string(j), y);
    }
    y = fc_forward(g, y, head, training, rng);
    rec("head", y);
    return y;
  }

  /// Softmax class distribution for one trial (no dropout, no training).
  std::vector<Real> predict_probs(const Tensor& trial) const {
    Graph g;
    Value logits = forward(g, trial);
    Value probs = softmax(g, logits, 0);
    return g.val(probs).data;
  }

 private:
  template <class Recorder>
  Value forward_tail(Graph& g, Value y, bool training, Rng* rng,
                     Recorder&& rec) const {
    if (!lstm_stack.empty()) {
      for (size_t j = 0; j < lstm_stack.size(); ++j) {
        const bool last = (j + 1 == lstm_stack.size());
        y = lstm_layer_forward(g, y, lstm_stack[j], last);
        if (!last && config.ls_drop > 0 && training && rng)
          y = dropout(g, y, config.ls_drop, training, *rng);
        rec("lstm" + std::to_string(j), y);
      }
    } else {
      y = global_average_pool(g, y);
      rec("global_average_pool", y);
    }
    for (size_t j = 0; j < fc_stack.size(); ++j) {
      y = fc_forward(g, y, fc_stack[j], training, rng);
      rec("fc" + std::to_string(j), y);
    }
    y = fc_forward(g, y, head, training, rng);
    rec("head", y);
    return y;
  }
};

// ---------------------------------------------------------------------------
// Builders

namespace detail {

inline void build_tail(Model& m, Rng& rng, Shape cur) {
  const std::vector<long> ls = m.config.ls_effective();
  long width = cur[0];
  if (!ls.empty()) {
    long in_width = cur[0];
    for (size_t j = 0; j < ls.size(); ++j) {
      const long H = ls[j];
      LSTMLayer layer;
      layer.hidden = H;
      layer.W = m.params.add("lstm" + std::to_string(j) + ".W",
                             Tensor(Shape{4 * H, in_width}));
      layer.U = m.params.add("lstm" + std::to_string(j) + ".U",
                             Tensor(Shape{4 * H, H}));
      layer.b = m.params.add("lstm" + std::to_string(j) + ".b",
                             Tensor(Shape{4 * H}));
      init_lstm(rng, *layer.W, *layer.U, *layer.b, in_width, H);
      m.lstm_stack.push_back(layer);
      in_width = H;
    }
    width = in_width;
  }
  const std::vector<long> fc = m.config.fc_effective();
  long in_width = width;
  for (size_t j = 0; j < fc.size(); ++j) {
    FCLayer layer;
    layer.weight = m.params.add("fc" + std::to_string(j) + ".weight",
                                Tensor(Shape{fc[j], in_width}));
    layer.bias = m.params.add("fc" + std::to_string(j) + ".bias",
                              Tensor(Shape{fc[j]}));
    layer.act = m.config.fc_act;
    layer.dropout_rate = m.config.fc_drop;
    init_glorot_uniform(rng, *layer.weight, in_width, fc[j]);
    m.fc_stack.push_back(layer);
    in_width = fc[j];
  }
  m.head.weight =
      m.params.add("head.weight", Tensor(Shape{kNumClasses, in_width}));
  m.head.bias = m.params.add("head.bias", Tensor(Shape{kNumClasses}));
  m.head.act = Activation::Linear;
  m.head.dropout_rate = 0;
  init_glorot_uniform(rng, *m.head.weight, in_width, kNumClasses);
}

inline void build_conv_stack(Model& m, Rng& rng, const std::string& prefix) {
  const HyperConfig& c = m.config;
  long in_ch = 1;
  for (long i = 0; i < c.conv_layers; ++i) {
    Conv2dLayer layer;
    layer.kernels =
        m.params.add(prefix + "conv" + std::to_string(i) + ".kernels",
                     Tensor(Shape{c.conv_num, in_ch, c.conv_size, c.conv_size}));
    layer.bias = m.params.add(prefix + "conv" + std::to_string(i) + ".bias",
                              Tensor(Shape{c.conv_num}));
    layer.stride = c.conv_stride;
    layer.act = c.conv_act;
    init_glorot_uniform(rng, *layer.kernels,
                        in_ch * c.conv_size * c.conv_size,
                        c.conv_num * c.conv_size * c.conv_size);
    m.conv_stack.push_back(layer);
    in_ch = c.conv_num;
  }
}

inline Shape plan_shape_after(const ShapePlan& plan, const std::string& name) {
  for (const ShapeStep& s : plan.steps)
    if (s.name == name) return s.out;
  throw ConfigError("plan step '" + name + "' missing");
}

}  // namespace detail

/// Deterministic model assembly from (config, seed). The plan is derived
/// first, so infeasible configurations fail before any allocation.
inline Model build_model(const HyperConfig& config, uint64_t seed,
                         long rows = 19, long cols = 200) {
  Model m;
  m.config = config;
  m.input_rows = rows;
  m.input_cols = cols;
  m.seed = seed;
  m.plan = plan_shapes(config, rows, cols);
  Rng rng(mix64(seed ^ 0x6a09e667f3bcc908ULL));

  if (config.family == Family::Intertwined) {
    long S = rows;
    for (int i = 0; i < config.mod_num; ++i) {
      const long outf = config.tdfc_num[static_cast<size_t>(i)];
      const long C = config.sdc_num[static_cast<size_t>(i)];
      const long k = config.sdc_ker[static_cast<size_t>(i)];
      IntertwinedModule mod;
      const std::string p = "module" + std::to_string(i);
      mod.tdfc.weight = m.params.add(p + ".tdfc.weight", Tensor(Shape{outf, S}));
      mod.tdfc.bias = m.params.add(p + ".tdfc.bias", Tensor(Shape{outf}));
      mod.tdfc.act = config.td_act;
      init_glorot_uniform(rng, *mod.tdfc.weight, S, outf);
      mod.sdc.kernels = m.params.add(p + ".sdc.kernels", Tensor(Shape{C, k}));
      mod.sdc.bias = m.params.add(p + ".sdc.bias", Tensor(Shape{C}));
      mod.sdc.act = config.sdc_act;
      init_glorot_uniform(rng, *mod.sdc.kernels, k, k * C);
      mod.pool_size = config.pool_size;
      mod.pool_kind = config.pool_type;
      m.modules.push_back(mod);
      S = outf * C;
    }
    const std::string last_flat =
        "module" + std::to_string(config.mod_num - 1) + ".flatten";
    detail::build_tail(m, rng, detail::plan_shape_after(m.plan, last_flat));
    return m;
  }

  m.mesh = Mesh::from_id(config.mesh_id);
  if (config.family == Family::Cascade) {
    detail::build_conv_stack(m, rng, "");
    Shape cur = detail::plan_shape_after(m.plan, "conv_flatten");
    long in_width = cur[0];
    const std::vector<long> fc = config.fc_effective();
    for (size_t j = 0; j < fc.size(); ++j) {
      TdFCLayer layer;
      layer.weight = m.params.add("conv_fc" + std::to_string(j) + ".weight",
                                  Tensor(Shape{fc[j], in_width}));
      layer.bias = m.params.add("conv_fc" + std::to_string(j) + ".bias",
                                Tensor(Shape{fc[j]}));
      layer.act = config.fc_act;
      init_glorot_uniform(rng, *layer.weight, in_width, fc[j]);
      m.conv_tail.push_back(layer);
      in_width = fc[j];
    }
    detail::build_tail(m, rng, Shape{in_width, cur[1]});
    return m;
  }

  // parallel
  detail::build_conv_stack(m, rng, "cnn.");
  const Shape cnn_out = detail::plan_shape_after(m.plan, "cnn.time_average");
  const std::vector<long> ls = config.ls_effective();
  long rec_width = rows;
  if (!ls.empty()) {
    long in_width = rows;
    for (size_t j = 0; j < ls.size(); ++j) {
      const long H = ls[j];
      LSTMLayer layer;
      layer.hidden = H;
      layer.W = m.params.add("lstm" + std::to_string(j) + ".W",
                             Tensor(Shape{4 * H, in_width}));
      layer.U = m.params.add("lstm" + std::to_string(j) + ".U",
                             Tensor(Shape{4 * H, H}));
      layer.b = m.params.add("lstm" + std::to_string(j) + ".b",
                             Tensor(Shape{4 * H}));
      init_lstm(rng, *layer.W, *layer.U, *layer.b, in_width, H);
      m.lstm_stack.push_back(layer);
      in_width = H;
    }
    rec_width = in_width;
  }
  long in_width = cnn_out[0] + rec_width;
  const std::vector<long> fc = config.fc_effective();
  for (size_t j = 0; j < fc.size(); ++j) {
    FCLayer layer;
    layer.weight = m.params.add("fc" + std::to_string(j) + ".weight",
                                Tensor(Shape{fc[j], in_width}));
    layer.bias = m.params.add("fc" + std::to_string(j) + ".bias",
                              Tensor(Shape{fc[j]}));
    layer.act = config.fc_act;
    layer.dropout_rate = config.fc_drop;
    init_glorot_uniform(rng, *layer.weight, in_width, fc[j]);
    m.fc_stack.push_back(layer);
    in_width = fc[j];
  }
  m.head.weight =
      m.params.add("head.weight", Tensor(Shape{kNumClasses, in_width}));
  m.head.bias = m.params.add("head.bias", Tensor(Shape{kNumClasses}));
  m.head.act = Activation::Linear;
  init_glorot_uniform(rng, *m.head.weight, in_width, kNumClasses);
  return m;
}

inline Model build_cascade(const HyperConfig& config, uint64_t seed,
                           long rows = 19, long cols = 200) {
  HyperConfig c = config;
  c.family = Family::Cascade;
  return build_model(c, seed, rows, cols);
}

inline Model build_parallel(const HyperConfig& config, uint64_t seed,
                            long rows = 19, long cols = 200) {
  HyperConfig c = config;
  c.family = Family::Parallel;
  return build_model(c, seed, rows, cols);
}

}  // namespace eegnet
