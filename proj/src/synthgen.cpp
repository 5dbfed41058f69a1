#include "flexens/synthgen.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "flexens/error.hpp"

namespace flexens {

namespace {

constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

void SynthConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::InvalidConfig, msg); };
  if (num_models < 1) fail("num_models must be >= 1");
  if (num_samples < 1) fail("num_samples must be >= 1");
  if (num_classes < 2) fail("num_classes must be >= 2");
  if (num_classes > 0xFFFFFFFFull || num_samples > 0xFFFFFFFFull) fail("dimension exceeds u32");
  if (!(signal_scale > 0.0) || !std::isfinite(signal_scale)) fail("signal_scale must be > 0");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) fail("noise_sigma must be >= 0");
  if (!cost_per_model.empty()) {
    if (cost_per_model.size() != num_models) fail("cost_per_model length must equal num_models");
    for (double c : cost_per_model)
      if (!(c > 0.0) || !std::isfinite(c)) fail("costs must be finite and > 0");
  }
}

std::uint64_t SplitMix64::next() {
  std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

Xoshiro256pp::Xoshiro256pp(std::uint64_t seed) {
  SplitMix64 sm(seed);
  for (auto& word : s_) word = sm.next();
}

std::uint64_t Xoshiro256pp::next() {
  const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Xoshiro256pp::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double BoxMullerNormal::operator()(Xoshiro256pp& rng) {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = rng.uniform();
  const double u2 = rng.uniform();
  const double r = std::sqrt(-2.0 * std::log(1.0 - u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

EnsembleDataset generate(const SynthConfig& config) {
  config.validate();
  const std::size_t n = config.num_models;
  const std::size_t m = config.num_samples;
  const std::size_t c = config.num_classes;

  Xoshiro256pp rng(config.seed);
  std::vector<std::uint32_t> labels(m);
  for (auto& y : labels) {
    auto idx = static_cast<std::size_t>(rng.uniform() * static_cast<double>(c));
    y = static_cast<std::uint32_t>(idx < c ? idx : c - 1);
  }
  std::vector<double> difficulty(m);
  for (auto& d : difficulty) d = rng.uniform();

  BoxMullerNormal normal;
  std::vector<float> logits(n * m * c);
  std::size_t pos = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t s = 0; s < m; ++s) {
      const double signal = config.signal_scale * (1.0 - difficulty[s]);
      for (std::size_t k = 0; k < c; ++k) {
        const double base = (k == labels[s]) ? signal : 0.0;
        logits[pos++] = static_cast<float>(base + config.noise_sigma * normal(rng));
      }
    }
  }

  std::vector<double> costs = config.cost_per_model;
  if (costs.empty()) costs.assign(n, kDefaultCostMs);
  return EnsembleDataset(n, m, c, std::move(logits), std::move(labels), std::move(costs));
}

}  // namespace flexens
