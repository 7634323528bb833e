#pragma once

#include <string>

#include "eegnet/common.hpp"

namespace eegnet {

enum class Activation { Relu, Softmax, Elu, Selu, Linear };
enum class PoolKind { Max, Average };
enum class Minimizer { Sgd, Rmsprop };
enum class Family { Intertwined, Cascade, Parallel };

// Self-normalizing constants for selu; elu uses alpha = 1.
inline constexpr Real kSeluLambda = Real(1.0507009873554805);
inline constexpr Real kSeluAlpha = Real(1.6732632423543772);

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::Relu: return "relu";
    case Activation::Softmax: return "softmax";
    case Activation::Elu: return "elu";
    case Activation::Selu: return "selu";
    case Activation::Linear: return "linear";
  }
  return "?";
}

inline Activation activation_from(const std::string& s) {
  if (s == "relu") return Activation::Relu;
  if (s == "softmax") return Activation::Softmax;
  if (s == "elu") return Activation::Elu;
  if (s == "selu") return Activation::Selu;
  if (s == "linear") return Activation::Linear;
  throw ConfigError("unknown activation kind '" + s + "'");
}

inline std::string to_string(PoolKind p) {
  return p == PoolKind::Max ? "max" : "average";
}

inline PoolKind pool_from(const std::string& s) {
  if (s == "max" || s == "MaxPooling") return PoolKind::Max;
  if (s == "average" || s == "AveragePooling") return PoolKind::Average;
  throw ConfigError("unknown pooling kind '" + s + "'");
}

inline std::string to_string(Minimizer m) {
  return m == Minimizer::Sgd ? "sgd" : "rmsprop";
}

inline Minimizer minimizer_from(const std::string& s) {
  if (s == "sgd") return Minimizer::Sgd;
  if (s == "rmsprop") return Minimizer::Rmsprop;
  throw ConfigError("unknown minimizer '" + s + "'");
}

inline std::string to_string(Family f) {
  switch (f) {
    case Family::Intertwined: return "intertwined";
    case Family::Cascade: return "cascade";
    case Family::Parallel: return "parallel";
  }
  return "?";
}

inline Family family_from(const std::string& s) {
  if (s == "intertwined") return Family::Intertwined;
  if (s == "cascade") return Family::Cascade;
  if (s == "parallel") return Family::Parallel;
  throw ConfigError("unknown model family '" + s + "'");
}

}  // namespace eegnet
