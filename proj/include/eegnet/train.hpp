#pragma once

#include <limits>

#include "eegnet/architectures.hpp"
#include "eegnet/data.hpp"

namespace eegnet {

// ---------------------------------------------------------------------------
// Optimizers. Gradients are consumed (zeroed) by each step.

/// Plain gradient descent: theta <- theta - lr * g.
inline void sgd_step(ParamStore& params, Real lr) {
  for (auto& e : params.entries()) {
    for (size_t i = 0; i < e.tensor.data.size(); ++i) {
      const Real g = e.tensor.grad[i];
      if (!std::isfinite(g))
        throw NumericError("training diverged: non-finite gradient in '" +
                           e.name + "'");
      e.tensor.data[i] -= lr * g;
    }
    e.tensor.zero_grad();
  }
}

inline constexpr Real kDefaultLearningRate = Real(0.001);
inline constexpr Real kDefaultRmspropRho = Real(0.9);
inline constexpr Real kDefaultRmspropEpsilon = Real(1e-7);

/// RMSProp: v <- rho v + (1-rho) g^2; theta <- theta - lr g / (sqrt(v) + eps).
inline void rmsprop_step(ParamStore& params, Real lr = kDefaultLearningRate,
                         Real rho = kDefaultRmspropRho,
                         Real epsilon = kDefaultRmspropEpsilon) {
  if (!(rho > 0 && rho < 1)) throw ConfigError("rmsprop rho must lie in (0,1)");
  for (auto& e : params.entries()) {
    if (e.opt_state.size() != e.tensor.data.size())
      e.opt_state.assign(e.tensor.data.size(), Real(0));
    for (size_t i = 0; i < e.tensor.data.size(); ++i) {
      const Real g = e.tensor.grad[i];
      if (!std::isfinite(g))
        throw NumericError("training diverged: non-finite gradient in '" +
                           e.name + "'");
      e.opt_state[i] = rho * e.opt_state[i] + (1 - rho) * g * g;
      e.tensor.data[i] -= lr * g / (std::sqrt(e.opt_state[i]) + epsilon);
    }
    e.tensor.zero_grad();
  }
}

// ---------------------------------------------------------------------------
// Evaluation

/// Fraction of trials whose argmax class matches the label. Ties resolve to
/// the lowest class index.
inline Real evaluate_accuracy(const Model& model, const Dataset& ds) {
  if (ds.trials.empty()) throw DataError("cannot evaluate on an empty dataset");
  long hits = 0;
  for (const TrialTensor& t : ds.trials) {
    const std::vector<Real> probs = model.predict_probs(t.data);
    int arg = 0;
    for (int c = 1; c < static_cast<int>(probs.size()); ++c)
      if (probs[static_cast<size_t>(c)] > probs[static_cast<size_t>(arg)]) arg = c;
    if (arg == t.label) ++hits;
  }
  return static_cast<Real>(hits) / static_cast<Real>(ds.trials.size());
}

// ---------------------------------------------------------------------------
// Training loop

struct EpochStats {
  int epoch = 0;
  Real train_loss = 0;
  Real val_loss = 0;
  Real val_accuracy = 0;
};

struct TrainRecord {
  std::vector<EpochStats> epochs;
  int best_epoch = -1;
  Real best_val_loss = std::numeric_limits<Real>::infinity();
  Real best_val_accuracy = 0;
  uint64_t seed = 0;
  std::string config_hash;
  long batch_size = 0;

  /// One epoch per line: epoch, train loss, val loss, val accuracy.
  void write_lines(std::ostream& os) const {
    os.precision(17);
    for (const EpochStats& e : epochs)
      os << e.epoch << "\t" << e.train_loss << "\t" << e.val_loss << "\t"
         << e.val_accuracy << "\n";
  }

  nlohmann::json summary_json() const {
    nlohmann::json j;
    j["epochs"] = static_cast<int>(epochs.size());
    j["best_epoch"] = best_epoch;
    j["best_val_loss"] = best_val_loss;
    j["best_val_accuracy"] = best_val_accuracy;
    j["seed"] = seed;
    j["config_hash"] = config_hash;
    j["batch_size"] = batch_size;
    return j;
  }
};

struct FitOptions {
  int epochs = 100;     // best-val-loss snapshotting makes long runs safe
  long batch_size = 64;
  uint64_t seed = 0;
  Real learning_rate = kDefaultLearningRate;
  Real rho = kDefaultRmspropRho;
  Real epsilon = kDefaultRmspropEpsilon;
  bool restore_best = true;
};

/// Mean cross entropy of the model over a dataset, without dropout.
inline Real mean_loss(const Model& model, const Dataset& ds) {
  Real total = 0;
  for (const TrialTensor& t : ds.trials) {
    Graph g;
    Value logits = model.forward(g, t.data, /*training=*/false, nullptr);
    total += scalar_value(g, cross_entropy(g, logits, t.label));
  }
  return total / static_cast<Real>(ds.trials.size());
}

/// Shuffled mini-batch training with per-epoch validation and retention of
/// the parameters at the best validation loss. Deterministic under a fixed
/// seed.
inline TrainRecord fit(Model& model, const Dataset& train, const Dataset& val,
                       const FitOptions& opt) {
  if (train.trials.empty() || val.trials.empty())
    throw DataError("fit requires non-empty train and validation sets");
  if (opt.batch_size < 1) throw ConfigError("batch size must be >= 1");

  TrainRecord record;
  record.seed = opt.seed;
  record.config_hash = model.config.hash();
  record.batch_size = opt.batch_size;

  Rng rng(mix64(opt.seed ^ 0x464954ULL));
  std::vector<size_t> order(train.trials.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::vector<std::vector<Real>> best_params;

  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    rng.shuffle(order);
    Real epoch_loss = 0;
    long batches = 0;
    for (size_t start = 0; start < order.size();
         start += static_cast<size_t>(opt.batch_size)) {
      const size_t end =
          std::min(order.size(), start + static_cast<size_t>(opt.batch_size));
      const long n = static_cast<long>(end - start);
      model.params.zero_grad();
      Real batch_loss = 0;
      for (size_t i = start; i < end; ++i) {
        const TrialTensor& t = train.trials[order[i]];
        Graph g;
        Value logits = model.forward(g, t.data, /*training=*/true, &rng);
        Value loss = cross_entropy(g, logits, t.label);
        batch_loss += scalar_value(g, loss);
        g.backward(loss);
      }
      batch_loss /= static_cast<Real>(n);
      if (!std::isfinite(batch_loss))
        throw NumericError("training diverged: non-finite loss at epoch " +
                           std::to_string(epoch) + ", batch " +
                           std::to_string(batches) + ", lr " +
                           std::to_string(opt.learning_rate));
      model.params.scale_grad(Real(1) / static_cast<Real>(n));
      if (model.config.minimizer == Minimizer::Sgd)
        sgd_step(model.params, opt.learning_rate);
      else
        rmsprop_step(model.params, opt.learning_rate, opt.rho, opt.epsilon);
      epoch_loss += batch_loss;
      ++batches;
    }

    EpochStats es;
    es.epoch = epoch;
    es.train_loss = epoch_loss / static_cast<Real>(batches);
    es.val_loss = mean_loss(model, val);
    es.val_accuracy = evaluate_accuracy(model, val);
    record.epochs.push_back(es);

    if (es.val_loss < record.best_val_loss) {
      record.best_val_loss = es.val_loss;
      record.best_val_accuracy = es.val_accuracy;
      record.best_epoch = epoch;
      best_params = model.params.snapshot();
    }
  }

  if (opt.restore_best && !best_params.empty()) model.params.restore(best_params);
  return record;
}

}  // namespace eegnet
