// calibration.hpp — per-stage threshold search on M = alpha*R + (1-alpha)*E.
//
// Stages are searched greedily in order. While stage k is searched, earlier
// thresholds keep their chosen values and later ones sit at 1.0 (no early
// exit). Each grid candidate is scored on the calibration split and the
// lowest M wins; equal M resolves to the smaller threshold.
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "flexens/cascade.hpp"
#include "flexens/dataset.hpp"

namespace flexens {

inline constexpr double kDefaultAlpha = 0.5;
inline constexpr double kDefaultGridStep = 0.01;

struct CalibrationObjective {
  double alpha = kDefaultAlpha;
  double R = 0.0;
  double E = 0.0;
  double M = 0.0;
};

double objective_value(double alpha, double R, double E);

class GridSpec {
 public:
  explicit GridSpec(double step = kDefaultGridStep);

  double step() const noexcept { return step_; }
  /// Number of intervals; candidates are i / intervals for i = 0..intervals.
  std::size_t intervals() const noexcept { return intervals_; }
  std::size_t size() const noexcept { return intervals_ + 1; }
  double value(std::size_t i) const {
    return static_cast<double>(i) / static_cast<double>(intervals_);
  }

 private:
  double step_;
  std::size_t intervals_;
};

/// Runs the cascade over the dataset and scores the schedule.
CalibrationObjective evaluate_objective(const EnsembleDataset& dataset,
                                        const ThresholdSchedule& schedule, double alpha);

/// Replays a schedule against precomputed stage results. Bit-identical to the
/// dataset overload.
CalibrationObjective evaluate_objective(const StageTable& table,
                                        std::span<const std::uint32_t> labels,
                                        std::size_t wrong_full,
                                        const ThresholdSchedule& schedule, double alpha);

struct CalibrationResult {
  ThresholdSchedule schedule;
  // stage_objectives[k-1][i] = M with grid value i at stage k (search context).
  std::vector<std::vector<double>> stage_objectives;
  CalibrationObjective objective;  // final schedule on the calibration split
};

CalibrationResult calibrate_detailed(const EnsembleDataset& dataset, double alpha,
                                     const GridSpec& grid = GridSpec());

ThresholdSchedule calibrate(const EnsembleDataset& dataset, double alpha = kDefaultAlpha,
                            const GridSpec& grid = GridSpec());

/// Schedule JSON: {"version":1, "alpha":..., "grid_step":..., "thresholds":[...]}.
/// Calibrated files also record the calibration split's fingerprint so a
/// run on the same split can be refused.
struct ScheduleFile {
  int version = 1;
  std::optional<double> alpha;
  std::optional<double> grid_step;
  ThresholdSchedule schedule;
  std::optional<std::uint64_t> calibration_fingerprint;
  bool allow_same_split = false;
};

void save_schedule(const ScheduleFile& file, const std::filesystem::path& path);
ScheduleFile load_schedule(const std::filesystem::path& path);

}  // namespace flexens
