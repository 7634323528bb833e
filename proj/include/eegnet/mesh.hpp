#pragma once

#include <json.hpp>

#include "eegnet/common.hpp"

namespace eegnet {

/// Electrode-to-grid mapping for the convolutional baselines. Grid cells
/// without an electrode stay zero.
struct Mesh {
  long rows = 0;
  long cols = 0;
  std::vector<std::pair<long, long>> positions;  // per channel index
  std::vector<std::string> channel_names;

  long channels() const { return static_cast<long>(positions.size()); }

  void validate() const {
    std::vector<char> seen(static_cast<size_t>(rows * cols), 0);
    for (const auto& [r, c] : positions) {
      if (r < 0 || r >= rows || c < 0 || c >= cols)
        throw ConfigError("mesh position outside grid");
      char& cell = seen[static_cast<size_t>(r * cols + c)];
      if (cell) throw ConfigError("mesh assigns two channels to one cell");
      cell = 1;
    }
  }

  /// The 19-channel 10/20 montage on a 5x5 grid, anterior row first.
  static Mesh grid_5x5_1020() {
    Mesh m;
    m.rows = 5;
    m.cols = 5;
    m.channel_names = {"Fp1", "Fp2", "F7", "F3", "Fz", "F4", "F8",
                       "T3",  "C3",  "Cz", "C4", "T4", "T5", "P3",
                       "Pz",  "P4",  "T6", "O1", "O2"};
    m.positions = {{0, 1}, {0, 3},                          // Fp1 Fp2
                   {1, 0}, {1, 1}, {1, 2}, {1, 3}, {1, 4},  // F7 F3 Fz F4 F8
                   {2, 0}, {2, 1}, {2, 2}, {2, 3}, {2, 4},  // T3 C3 Cz C4 T4
                   {3, 0}, {3, 1}, {3, 2}, {3, 3}, {3, 4},  // T5 P3 Pz P4 T6
                   {4, 1}, {4, 3}};                         // O1 O2
    return m;
  }

  static Mesh from_id(const std::string& id) {
    if (id == "grid-5x5-1020") return grid_5x5_1020();
    throw ConfigError("unknown mesh id '" + id + "'");
  }

  static Mesh from_json(const nlohmann::json& j) {
    Mesh m;
    m.rows = j.at("rows").get<long>();
    m.cols = j.at("cols").get<long>();
    for (const auto& e : j.at("channels")) {
      m.channel_names.push_back(e.at("name").get<std::string>());
      m.positions.emplace_back(e.at("row").get<long>(), e.at("col").get<long>());
    }
    m.validate();
    return m;
  }
};

}  // namespace eegnet
