// cascade.hpp — score-margin gated sequential ensemble execution
//
// Models run in dataset order. After model k the running logit average is
// softmaxed and its score margin compared with thresholds[k-1]: margin >= tau
// stops the cascade, anything lower runs the next model. The last model never
// consults a threshold.
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "flexens/dataset.hpp"

namespace flexens {

struct ThresholdSchedule {
  // thresholds[k-1] gates continuation after k models; size N-1.
  std::vector<double> thresholds;

  static ThresholdSchedule uniform(std::size_t num_models, double tau);

  /// Throws ScheduleLengthMismatch or InvalidSchedule.
  void validate(std::size_t num_models) const;

  friend bool operator==(const ThresholdSchedule&, const ThresholdSchedule&) = default;
};

struct CascadeTrace {
  std::size_t models_used = 0;
  std::vector<double> margins;  // margin after each executed stage
  std::size_t prediction = 0;
  double cost_ms = 0.0;
};

/// Per-model logit vectors of one sample, in execution order.
CascadeTrace run_sample(std::span<const std::vector<double>> logits_per_model,
                        const ThresholdSchedule& schedule, std::span<const double> costs_ms);

CascadeTrace run_sample(const EnsembleDataset& dataset, std::size_t sample,
                        const ThresholdSchedule& schedule);

/// One trace per sample, in sample order.
std::vector<CascadeTrace> run_dataset(const EnsembleDataset& dataset,
                                      const ThresholdSchedule& schedule);

/// Margin and prediction of every sample at every ensemble size k = 1..N,
/// computed with the same arithmetic as run_sample. Since a cascade's
/// decision after k models depends only on those k models, any schedule can
/// be replayed against this table without touching logits again.
class StageTable {
 public:
  explicit StageTable(const EnsembleDataset& dataset);

  std::size_t num_models() const noexcept { return num_models_; }
  std::size_t num_samples() const noexcept { return num_samples_; }

  /// k is the ensemble size, 1..N.
  double margin(std::size_t sample, std::size_t k) const {
    return margins_[sample * num_models_ + (k - 1)];
  }
  std::uint32_t prediction(std::size_t sample, std::size_t k) const {
    return predictions_[sample * num_models_ + (k - 1)];
  }
  /// Cumulative cost of running the first k models.
  double prefix_cost(std::size_t k) const { return prefix_cost_[k]; }

  /// Number of models the cascade runs for `sample` under the schedule.
  std::size_t models_used(std::size_t sample, std::span<const double> thresholds) const {
    for (std::size_t k = 1; k < num_models_; ++k)
      if (margin(sample, k) >= thresholds[k - 1]) return k;
    return num_models_;
  }

 private:
  std::size_t num_models_;
  std::size_t num_samples_;
  std::vector<double> margins_;            // [M][N]
  std::vector<std::uint32_t> predictions_; // [M][N]
  std::vector<double> prefix_cost_;        // [N+1]
};

/// Cumulative per-model costs, prefix[0] = 0, summed in model order.
std::vector<double> prefix_costs(std::span<const double> costs_ms);

}  // namespace flexens
