#pragma once

#include "aqr/types.hpp"

#include <cstdint>
#include <random>
#include <string>

namespace aqr {

// Deterministic draw stream on top of std::mt19937_64 (the standard-specified
// 64-bit Mersenne Twister); the uniform/normal/gamma transforms are our own,
// so a seed pins the byte-exact output across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform();             // open interval (0, 1)
  double normal();              // inverse-c.d.f. transform
  double gamma_int(int shape);  // sum of `shape` unit exponentials

 private:
  std::mt19937_64 engine_;
};

// Synthetic data generators, all over an equally spaced x grid on [-3, 3]:
//   appendixA:    y = x + x^2 + Gamma(4, 1)
//   heteroNormal: y = x + x^2 + (1 + |x|) N(0, 1)
//   sine:         y = sin(3x) + N(0, 0.3^2)
Dataset simulate_preset(const std::string& preset, Eigen::Index n, std::uint64_t seed);

}  // namespace aqr
