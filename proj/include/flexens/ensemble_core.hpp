// ensemble_core.hpp — softmax, logit averaging, argmax and score margin.
// All kernels are pure and computed in double.
#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace flexens {

/// Post-softmax output: entries in (0,1) summing to 1.
struct ProbabilityVector {
  std::vector<double> values;

  std::size_t size() const noexcept { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
};

/// Running mean of the first `k` model logit vectors.
struct AveragedLogits {
  std::vector<double> values;
  std::size_t k = 0;
};

/// Incremental mean, mean_k = mean_{k-1} + (z - mean_{k-1}) / k.
/// Averaging k copies of the same vector reproduces it exactly, and the
/// cascade and the full-ensemble baseline share this exact arithmetic.
class RunningAverage {
 public:
  explicit RunningAverage(std::size_t num_classes) : mean_(num_classes, 0.0) {}

  template <typename T>
  void add(std::span<const T> z) {
    ++k_;
    const double inv = 1.0 / static_cast<double>(k_);
    if (k_ == 1) {
      for (std::size_t j = 0; j < mean_.size(); ++j) mean_[j] = static_cast<double>(z[j]);
      return;
    }
    for (std::size_t j = 0; j < mean_.size(); ++j)
      mean_[j] += (static_cast<double>(z[j]) - mean_[j]) * inv;
  }

  std::span<const double> values() const noexcept { return mean_; }
  std::size_t count() const noexcept { return k_; }

 private:
  std::vector<double> mean_;
  std::size_t k_ = 0;
};

ProbabilityVector softmax(std::span<const double> z);

/// Writes softmax(z) into `out` (same length); no validation beyond size.
void softmax_into(std::span<const double> z, std::span<double> out);

AveragedLogits average_logits(std::span<const std::vector<double>> vectors);

/// Index of the maximum entry; lowest index on exact ties.
std::size_t predict(std::span<const double> p);
inline std::size_t predict(const ProbabilityVector& p) { return predict(std::span<const double>(p.values)); }

/// Largest entry minus the second largest, where the second largest is taken
/// over the multiset with one occurrence of the maximum removed. A duplicated
/// maximum therefore gives 0.
double score_margin(std::span<const double> p);

/// Largest margin a post-softmax vector can report.
inline constexpr double kMaxProbabilityMargin = 1.0 - 0x1.0p-53;

/// Score margin of a post-softmax vector, kept in [0,1). With a logit gap
/// above ~37 the top probability rounds to exactly 1 in double; clamping keeps
/// a threshold of 1.0 unreachable.
double probability_margin(std::span<const double> p);
inline double score_margin(const ProbabilityVector& p) { return probability_margin(p.values); }

}  // namespace flexens
