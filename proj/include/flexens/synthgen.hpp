// synthgen.hpp — seeded synthetic ensemble datasets
//
// Each sample gets a uniform label y and a uniform difficulty d in [0,1).
// The clean score vector is s*(1-d) at y and 0 elsewhere; every model adds
// its own N(0, sigma^2) noise per class. Easy samples therefore yield large
// score margins, hard ones small margins, and averaging models cancels noise.
//
// Stream contract (reproducible in any language):
//   state     xoshiro256++ whose four words are successive splitmix64 outputs
//             starting from `seed`
//   uniform   (next() >> 11) * 2^-53, in [0,1)
//   label     floor(uniform * C)
//   normal    Box-Muller on a consecutive pair (u1, u2):
//               r = sqrt(-2 ln(1 - u1)); emits r*cos(2 pi u2) then r*sin(2 pi u2)
//   order     all M labels, then all M difficulties, then noise in
//             model-major, sample, class order
//   storage   b + sigma * normal computed in double, rounded to binary32
#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "flexens/dataset.hpp"

namespace flexens {

inline constexpr double kDefaultSignalScale = 4.0;
inline constexpr double kDefaultNoiseSigma = 1.0;
inline constexpr double kDefaultCostMs = 1.667;

struct SynthConfig {
  std::size_t num_models = 7;
  std::size_t num_samples = 10000;
  std::size_t num_classes = 10;
  std::uint64_t seed = 42;
  double signal_scale = kDefaultSignalScale;
  double noise_sigma = kDefaultNoiseSigma;
  // Empty means kDefaultCostMs for every model.
  std::vector<double> cost_per_model;

  void validate() const;
};

class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next();

 private:
  std::uint64_t state_;
};

class Xoshiro256pp {
 public:
  explicit Xoshiro256pp(std::uint64_t seed);
  std::uint64_t next();
  double uniform();

 private:
  std::array<std::uint64_t, 4> s_{};
};

class BoxMullerNormal {
 public:
  double operator()(Xoshiro256pp& rng);

 private:
  double spare_ = 0.0;
  bool has_spare_ = false;
};

EnsembleDataset generate(const SynthConfig& config);

}  // namespace flexens
