#pragma once

#include <json.hpp>

#include "eegnet/kinds.hpp"

namespace eegnet {

inline constexpr int kConfigSchemaVersion = 1;
inline constexpr int kNumClasses = 6;

/// One point of the hyperparameter space: a full architecture plus training
/// assignment. List entries address per-module (or per-layer) values; an
/// LSTM/FC stack ends at the first 0 entry.
struct HyperConfig {
  Family family = Family::Intertwined;

  // intertwined
  int mod_num = 2;
  std::vector<long> tdfc_num = {16, 16};
  Activation td_act = Activation::Selu;
  std::vector<long> sdc_num = {16, 16};
  std::vector<long> sdc_ker = {3, 3};
  Activation sdc_act = Activation::Selu;
  long pool_size = 2;
  PoolKind pool_type = PoolKind::Average;

  // cascade / parallel
  long conv_num = 16;
  long conv_size = 2;
  long conv_stride = 1;
  long conv_layers = 1;
  Activation conv_act = Activation::Relu;
  std::string mesh_id = "grid-5x5-1020";

  // shared tail
  std::vector<long> ls_num = {50};
  Real ls_drop = Real(0.1);
  std::vector<long> fc_num = {30};
  Activation fc_act = Activation::Selu;
  Real fc_drop = Real(0.1);
  Minimizer minimizer = Minimizer::Rmsprop;

  /// LSTM widths up to the first 0 (0 in front means no LSTM layers).
  std::vector<long> ls_effective() const { return effective(ls_num); }
  /// Hidden FC widths up to the first 0.
  std::vector<long> fc_effective() const { return effective(fc_num); }

  void validate() const {
    if (family == Family::Intertwined) {
      if (mod_num < 1) throw ConfigError("modNum must be >= 1");
      const size_t need = static_cast<size_t>(mod_num);
      if (tdfc_num.size() < need || sdc_num.size() < need ||
          sdc_ker.size() < need)
        throw ConfigError("per-module lists shorter than modNum");
      for (int i = 0; i < mod_num; ++i) {
        if (tdfc_num[static_cast<size_t>(i)] < 1 ||
            sdc_num[static_cast<size_t>(i)] < 1 ||
            sdc_ker[static_cast<size_t>(i)] < 1)
          throw ConfigError("module extents must be positive");
      }
      if (pool_size < 1) throw ConfigError("poolSize must be >= 1");
    } else {
      if (conv_num < 1 || conv_size < 1 || conv_stride < 1 || conv_layers < 1)
        throw ConfigError("convolution hyperparameters must be positive");
    }
    for (long v : ls_num)
      if (v < 0) throw ConfigError("LSnum entries must be >= 0");
    for (long v : fc_num)
      if (v < 0) throw ConfigError("FCnum entries must be >= 0");
    if (ls_drop < 0 || ls_drop >= 1 || fc_drop < 0 || fc_drop >= 1)
      throw ConfigError("dropout rates must lie in [0, 1)");
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["schema_version"] = kConfigSchemaVersion;
    j["family"] = to_string(family);
    j["modNum"] = mod_num;
    j["tdFCnum"] = tdfc_num;
    j["tdNact"] = to_string(td_act);
    j["sdCnum"] = sdc_num;
    j["sdCker"] = sdc_ker;
    j["sdCact"] = to_string(sdc_act);
    j["poolSize"] = pool_size;
    j["pooltype"] = to_string(pool_type);
    j["convNum"] = conv_num;
    j["convSize"] = conv_size;
    j["convStride"] = conv_stride;
    j["convLayers"] = conv_layers;
    j["convAct"] = to_string(conv_act);
    j["mesh"] = mesh_id;
    j["LSnum"] = ls_num;
    j["LSdrop"] = ls_drop;
    j["FCnum"] = fc_num;
    j["FCact"] = to_string(fc_act);
    j["FCdrop"] = fc_drop;
    j["minimizer"] = to_string(minimizer);
    return j;
  }

  static HyperConfig from_json(const nlohmann::json& j) {
    if (j.value("schema_version", 0) != kConfigSchemaVersion)
      throw ConfigError("unsupported config schema version");
    HyperConfig c;
    c.family = family_from(j.at("family").get<std::string>());
    c.mod_num = j.value("modNum", 2);
    c.tdfc_num = j.value("tdFCnum", c.tdfc_num);
    c.td_act = activation_from(j.value("tdNact", "selu"));
    c.sdc_num = j.value("sdCnum", c.sdc_num);
    c.sdc_ker = j.value("sdCker", c.sdc_ker);
    c.sdc_act = activation_from(j.value("sdCact", "selu"));
    c.pool_size = j.value("poolSize", 2L);
    c.pool_type = pool_from(j.value("pooltype", "average"));
    c.conv_num = j.value("convNum", 16L);
    c.conv_size = j.value("convSize", 2L);
    c.conv_stride = j.value("convStride", 1L);
    c.conv_layers = j.value("convLayers", 1L);
    c.conv_act = activation_from(j.value("convAct", "relu"));
    c.mesh_id = j.value("mesh", std::string("grid-5x5-1020"));
    c.ls_num = j.value("LSnum", c.ls_num);
    c.ls_drop = j.value("LSdrop", Real(0.1));
    c.fc_num = j.value("FCnum", c.fc_num);
    c.fc_act = activation_from(j.value("FCact", "selu"));
    c.fc_drop = j.value("FCdrop", Real(0.1));
    c.minimizer = minimizer_from(j.value("minimizer", "rmsprop"));
    c.validate();
    return c;
  }

  /// Stable FNV-1a hash of the canonical serialization.
  std::string hash() const {
    const std::string s = to_json().dump();
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : s) {
      h ^= ch;
      h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
  }

 private:
  static std::vector<long> effective(const std::vector<long>& v) {
    std::vector<long> out;
    for (long x : v) {
      if (x == 0) break;
      out.push_back(x);
    }
    return out;
  }
};

}  // namespace eegnet
