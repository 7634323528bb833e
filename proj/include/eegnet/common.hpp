#pragma once

#include <cstdint>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace eegnet {

// Working precision. Double by default; define EEGNET_SINGLE_PRECISION to
// trade gradient-check headroom for speed.
#if defined(EEGNET_SINGLE_PRECISION)
using Real = float;
#else
using Real = double;
#endif

using Shape = std::vector<long>;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad shapes, rank mismatches, kernel-too-long, infeasible chains.
struct ShapeError : Error {
  using Error::Error;
};

// Invalid hyperparameters, unknown kinds, bad CLI/file options.
struct ConfigError : Error {
  using Error::Error;
};

// Manifest/payload mismatches, labels out of range, malformed tables.
struct DataError : Error {
  using Error::Error;
};

// Non-finite losses or gradients, oracle failures.
struct NumericError : Error {
  using Error::Error;
};

inline long numel(const Shape& s) {
  long n = 1;
  for (long e : s) n *= e;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) os << "x";
    os << s[i];
  }
  if (s.empty()) os << "scalar";
  return os.str();
}

}  // namespace eegnet
