#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>

#include <json.hpp>

#include "eegnet/rng.hpp"
#include "eegnet/tensor.hpp"

namespace eegnet {

inline constexpr int kManifestVersion = 1;

inline const std::array<std::string, 6>& class_names() {
  static const std::array<std::string, 6> names = {
      "left_hand", "right_hand", "left_leg", "right_leg", "tongue", "passive"};
  return names;
}

/// One EEG trial: electrodes x samples, with its class label.
struct TrialTensor {
  Tensor data;  // [L x K]
  int label = 0;
  std::string subject = "S01";
  std::string session = "1";
  Real sample_rate = 200;
};

struct Dataset {
  std::vector<TrialTensor> trials;
  Real sample_rate = 200;
  std::string provenance = "raw";  // raw | bandpassed | synthetic

  long rows() const { return trials.empty() ? 0 : trials.front().data.shape[0]; }
  long cols() const { return trials.empty() ? 0 : trials.front().data.shape[1]; }
  size_t size() const { return trials.size(); }
};

// ---------------------------------------------------------------------------
// Binary persistence: headerless little-endian float32 payloads plus a JSON
// manifest naming file, offset, label, subject and session per trial.

inline void save_dataset(const Dataset& ds, const std::filesystem::path& dir,
                         const std::string& stem = "trials") {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const fs::path bin_path = dir / (stem + ".bin");
  const fs::path manifest_path = dir / (stem + ".json");

  std::ofstream bin(bin_path, std::ios::binary);
  if (!bin) throw DataError("cannot write " + bin_path.string());

  nlohmann::json manifest;
  manifest["version"] = kManifestVersion;
  manifest["sample_rate"] = ds.sample_rate;
  manifest["channels"] = ds.rows();
  manifest["samples"] = ds.cols();
  manifest["class_names"] = class_names();
  manifest["provenance"] = ds.provenance;
  nlohmann::json trials = nlohmann::json::array();

  uint64_t offset = 0;
  for (const TrialTensor& t : ds.trials) {
    std::vector<float> buf(t.data.data.size());
    for (size_t i = 0; i < buf.size(); ++i)
      buf[i] = static_cast<float>(t.data.data[i]);
    bin.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
    trials.push_back({{"file", bin_path.filename().string()},
                      {"offset", offset},
                      {"label", t.label},
                      {"subject", t.subject},
                      {"session", t.session}});
    offset += buf.size() * sizeof(float);
  }
  manifest["trials"] = std::move(trials);

  std::ofstream mf(manifest_path);
  if (!mf) throw DataError("cannot write " + manifest_path.string());
  mf << manifest.dump(2) << "\n";
}

inline Dataset load_dataset(const std::filesystem::path& manifest_path) {
  namespace fs = std::filesystem;
  std::ifstream mf(manifest_path);
  if (!mf) throw DataError("cannot open manifest " + manifest_path.string());
  nlohmann::json manifest;
  try {
    mf >> manifest;
  } catch (const std::exception& e) {
    throw DataError("malformed manifest " + manifest_path.string() + ": " +
                    e.what());
  }
  if (manifest.value("version", 0) != kManifestVersion)
    throw DataError("unsupported manifest version in " + manifest_path.string());

  Dataset ds;
  ds.sample_rate = manifest.value("sample_rate", Real(200));
  ds.provenance = manifest.value("provenance", std::string("raw"));
  const long L = manifest.at("channels").get<long>();
  const long K = manifest.at("samples").get<long>();
  const fs::path dir = manifest_path.parent_path();

  std::map<std::string, std::vector<char>> files;
  size_t index = 0;
  for (const auto& tj : manifest.at("trials")) {
    const std::string fname = tj.at("file").get<std::string>();
    auto it = files.find(fname);
    if (it == files.end()) {
      std::ifstream bin(dir / fname, std::ios::binary);
      if (!bin)
        throw DataError("trial " + std::to_string(index) +
                        ": cannot open payload file " + fname);
      std::vector<char> bytes((std::istreambuf_iterator<char>(bin)),
                              std::istreambuf_iterator<char>());
      it = files.emplace(fname, std::move(bytes)).first;
    }
    const std::vector<char>& bytes = it->second;
    const uint64_t offset = tj.at("offset").get<uint64_t>();
    const uint64_t need = static_cast<uint64_t>(L * K) * sizeof(float);
    if (offset + need > bytes.size())
      throw DataError("trial " + std::to_string(index) + ": file " + fname +
                      " truncated (need " + std::to_string(offset + need) +
                      " bytes, have " + std::to_string(bytes.size()) + ")");
    TrialTensor t;
    t.label = tj.at("label").get<int>();
    if (t.label < 0 || t.label >= 6)
      throw DataError("trial " + std::to_string(index) + ": label " +
                      std::to_string(t.label) + " outside 0..5");
    t.subject = tj.value("subject", std::string("S01"));
    t.session = tj.value("session", std::string("1"));
    t.sample_rate = ds.sample_rate;
    t.data = Tensor(Shape{L, K});
    const float* src = reinterpret_cast<const float*>(bytes.data() + offset);
    for (long i = 0; i < L * K; ++i) t.data.data[static_cast<size_t>(i)] = src[i];
    ds.trials.push_back(std::move(t));
    ++index;
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Delimiter-separated import: one channel per row.

inline Tensor read_csv_matrix(const std::filesystem::path& path,
                              char delimiter = ',') {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::vector<Real>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<Real> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, delimiter)) {
      try {
        row.push_back(static_cast<Real>(std::stod(cell)));
      } catch (const std::exception&) {
        throw DataError("non-numeric cell '" + cell + "' in " + path.string());
      }
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw DataError("ragged rows in " + path.string());
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError("empty matrix file " + path.string());
  Tensor t(Shape{static_cast<long>(rows.size()),
                 static_cast<long>(rows.front().size())});
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < rows[i].size(); ++j)
      t.at(static_cast<long>(i), static_cast<long>(j)) = rows[i][j];
  return t;
}

// ---------------------------------------------------------------------------
// Splitting

/// Stratified train/validation split: per (subject, class) group, a seeded
/// shuffle sends round(val_fraction * n) trials to validation.
inline std::pair<Dataset, Dataset> split(const Dataset& ds, Real val_fraction,
                                         uint64_t seed) {
  if (!(val_fraction > 0 && val_fraction < 1))
    throw ConfigError("val_fraction must lie in (0, 1)");
  if (ds.trials.empty()) throw DataError("cannot split an empty dataset");

  std::array<bool, 6> present{};
  for (const TrialTensor& t : ds.trials) present[static_cast<size_t>(t.label)] = true;
  for (int c = 0; c < 6; ++c)
    if (!present[static_cast<size_t>(c)])
      throw DataError("stratification impossible: class " + std::to_string(c) +
                      " (" + class_names()[static_cast<size_t>(c)] +
                      ") absent from dataset");

  std::map<std::pair<std::string, int>, std::vector<size_t>> groups;
  for (size_t i = 0; i < ds.trials.size(); ++i)
    groups[{ds.trials[i].subject, ds.trials[i].label}].push_back(i);

  Rng rng(mix64(seed ^ 0x53504c4954ULL));  // independent split stream
  std::vector<bool> in_val(ds.trials.size(), false);
  for (auto& [key, idx] : groups) {
    rng.shuffle(idx);
    const size_t n_val = static_cast<size_t>(
        std::llround(val_fraction * static_cast<Real>(idx.size())));
    for (size_t j = 0; j < n_val && j < idx.size(); ++j) in_val[idx[j]] = true;
  }

  Dataset train, val;
  train.sample_rate = val.sample_rate = ds.sample_rate;
  train.provenance = val.provenance = ds.provenance;
  for (size_t i = 0; i < ds.trials.size(); ++i)
    (in_val[i] ? val : train).trials.push_back(ds.trials[i]);
  if (train.trials.empty() || val.trials.empty())
    throw DataError("split produced an empty partition");
  return {std::move(train), std::move(val)};
}

// ---------------------------------------------------------------------------
// Standardization (training-split statistics only)

struct ChannelStats {
  std::vector<Real> mean;
  std::vector<Real> stddev;
  std::vector<bool> flagged;  // zero-variance channels: centered, not scaled
};

inline ChannelStats channel_stats(const Dataset& train) {
  if (train.trials.empty()) throw DataError("no trials to compute statistics");
  const long L = train.rows(), K = train.cols();
  ChannelStats st;
  st.mean.assign(static_cast<size_t>(L), 0);
  st.stddev.assign(static_cast<size_t>(L), 1);
  st.flagged.assign(static_cast<size_t>(L), false);
  const Real n =
      static_cast<Real>(train.trials.size()) * static_cast<Real>(K);
  for (long ch = 0; ch < L; ++ch) {
    Real s = 0;
    for (const TrialTensor& t : train.trials)
      for (long k = 0; k < K; ++k) s += t.data.at(ch, k);
    const Real mean = s / n;
    Real ss = 0;
    for (const TrialTensor& t : train.trials)
      for (long k = 0; k < K; ++k) {
        const Real d = t.data.at(ch, k) - mean;
        ss += d * d;
      }
    const Real var = ss / n;
    st.mean[static_cast<size_t>(ch)] = mean;
    if (var < Real(1e-24)) {
      st.flagged[static_cast<size_t>(ch)] = true;
      st.stddev[static_cast<size_t>(ch)] = 1;
    } else {
      st.stddev[static_cast<size_t>(ch)] = std::sqrt(var);
    }
  }
  return st;
}

inline Dataset standardize(const Dataset& ds, const ChannelStats& st) {
  Dataset out = ds;
  const long L = ds.rows(), K = ds.cols();
  if (static_cast<long>(st.mean.size()) != L)
    throw DataError("statistics channel count does not match dataset");
  for (TrialTensor& t : out.trials)
    for (long ch = 0; ch < L; ++ch) {
      const Real m = st.mean[static_cast<size_t>(ch)];
      const Real s = st.stddev[static_cast<size_t>(ch)];
      for (long k = 0; k < K; ++k) t.data.at(ch, k) = (t.data.at(ch, k) - m) / s;
    }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic EEG-like generator: per class, a fixed spatial weighting over the
// electrodes carrying a class-specific oscillation inside the 8-30 Hz band,
// with white noise and a random phase per trial.

inline const std::array<Real, 6>& synth_frequencies() {
  static const std::array<Real, 6> f = {9, 12, 16, 20, 24, 28};
  return f;
}

inline std::vector<Real> synth_spatial_weights(int cls, long channels) {
  std::vector<Real> w(static_cast<size_t>(channels));
  const Real mu = Real(1.5) + Real(3) * static_cast<Real>(cls);
  const Real sigma = Real(1.5);
  Real peak = 0;
  for (long ch = 0; ch < channels; ++ch) {
    const Real d = (static_cast<Real>(ch) - mu) / sigma;
    w[static_cast<size_t>(ch)] = std::exp(Real(-0.5) * d * d);
    peak = std::max(peak, w[static_cast<size_t>(ch)]);
  }
  for (Real& v : w) v /= peak;  // strongest channel has unit amplitude
  return w;
}

inline Dataset synth_generate(int n_per_class, uint64_t seed, Real noise_std,
                              Real amplitude = 1, long channels = 19,
                              long samples = 200, Real sample_rate = 200) {
  if (n_per_class < 1) throw ConfigError("n_per_class must be >= 1");
  Dataset ds;
  ds.sample_rate = sample_rate;
  ds.provenance = "synthetic";
  Rng rng(mix64(seed ^ 0x53594e5448ULL));
  const Real two_pi = Real(2) * std::numbers::pi_v<Real>;
  for (int cls = 0; cls < 6; ++cls) {
    const std::vector<Real> w = synth_spatial_weights(cls, channels);
    const Real freq = synth_frequencies()[static_cast<size_t>(cls)];
    for (int i = 0; i < n_per_class; ++i) {
      TrialTensor t;
      t.label = cls;
      t.sample_rate = sample_rate;
      t.subject = "S01";
      t.session = "1";
      t.data = Tensor(Shape{channels, samples});
      const Real phase = rng.uniform(0, two_pi);
      for (long ch = 0; ch < channels; ++ch) {
        const Real a = amplitude * w[static_cast<size_t>(ch)];
        for (long k = 0; k < samples; ++k) {
          const Real x = a * std::sin(two_pi * freq *
                                          static_cast<Real>(k) / sample_rate +
                                      phase);
          t.data.at(ch, k) =
              x + (noise_std > 0 ? rng.normal(0, noise_std) : Real(0));
        }
      }
      ds.trials.push_back(std::move(t));
    }
  }
  return ds;
}

}  // namespace eegnet
