#include "flexens/calibration.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>

#include "json.hpp"

#include "flexens/error.hpp"
#include "flexens/metrics.hpp"

namespace flexens {

using nlohmann::json;
using nlohmann::ordered_json;

double objective_value(double alpha, double R, double E) { return alpha * R + (1.0 - alpha) * E; }

GridSpec::GridSpec(double step) : step_(step), intervals_(0) {
  if (!(step > 0.0 && step <= 1.0))
    throw Error(ErrorKind::InvalidArgument, "grid step must lie in (0, 1]");
  const double n = 1.0 / step;
  const double rounded = std::round(n);
  if (std::abs(n - rounded) > 1e-9 * rounded)
    throw Error(ErrorKind::InvalidArgument, "1 / grid step must be an integer");
  intervals_ = static_cast<std::size_t>(rounded);
}

namespace {

void check_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw Error(ErrorKind::InvalidArgument, "alpha must lie in [0, 1]");
}

CalibrationObjective from_report(double alpha, const EvaluationReport& r) {
  return {alpha, r.R, r.E, objective_value(alpha, r.R, r.E)};
}

}  // namespace

CalibrationObjective evaluate_objective(const EnsembleDataset& dataset,
                                        const ThresholdSchedule& schedule, double alpha) {
  check_alpha(alpha);
  auto traces = run_dataset(dataset, schedule);
  return from_report(alpha, report(dataset, traces));
}

CalibrationObjective evaluate_objective(const StageTable& table,
                                        std::span<const std::uint32_t> labels,
                                        std::size_t wrong_full,
                                        const ThresholdSchedule& schedule, double alpha) {
  check_alpha(alpha);
  schedule.validate(table.num_models());
  const std::size_t n = table.num_models();
  ExitSummary s;
  s.exit_counts.assign(n, 0);
  for (std::size_t m = 0; m < table.num_samples(); ++m) {
    const auto used = table.models_used(m, schedule.thresholds);
    ++s.exit_counts[used - 1];
    s.num_wrong += table.prediction(m, used) != labels[m];
  }
  std::vector<double> prefix(n + 1);
  for (std::size_t k = 0; k <= n; ++k) prefix[k] = table.prefix_cost(k);
  return from_report(alpha, summarize(s, prefix, wrong_full));
}

CalibrationResult calibrate_detailed(const EnsembleDataset& dataset, double alpha,
                                     const GridSpec& grid) {
  check_alpha(alpha);
  const std::size_t n = dataset.num_models();
  if (n < 2) throw Error(ErrorKind::SingleModelEnsemble, "calibration needs at least 2 models");

  const StageTable table(dataset);
  std::size_t wrong_full = 0;
  for (std::size_t m = 0; m < dataset.num_samples(); ++m)
    wrong_full += table.prediction(m, n) != dataset.labels()[m];

  CalibrationResult result;
  result.schedule = ThresholdSchedule::uniform(n, 1.0);
  for (std::size_t k = 1; k < n; ++k) {
    std::vector<double> objectives(grid.size());
    std::size_t best = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      result.schedule.thresholds[k - 1] = grid.value(i);
      objectives[i] =
          evaluate_objective(table, dataset.labels(), wrong_full, result.schedule, alpha).M;
      if (objectives[i] < objectives[best]) best = i;
    }
    result.schedule.thresholds[k - 1] = grid.value(best);
    result.stage_objectives.push_back(std::move(objectives));
  }
  result.objective =
      evaluate_objective(table, dataset.labels(), wrong_full, result.schedule, alpha);
  return result;
}

ThresholdSchedule calibrate(const EnsembleDataset& dataset, double alpha, const GridSpec& grid) {
  return calibrate_detailed(dataset, alpha, grid).schedule;
}

void save_schedule(const ScheduleFile& file, const std::filesystem::path& path) {
  ordered_json j = ordered_json::object();
  j["version"] = file.version;
  if (file.alpha) j["alpha"] = *file.alpha;
  if (file.grid_step) j["grid_step"] = *file.grid_step;
  j["thresholds"] = file.schedule.thresholds;
  if (file.calibration_fingerprint) {
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx",
                  static_cast<unsigned long long>(*file.calibration_fingerprint));
    j["calibration_fingerprint"] = hex;
  }
  if (file.allow_same_split) j["allow_same_split"] = true;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoFailure, "cannot create " + path.string());
  out << j.dump() << '\n';
  out.flush();
  if (!out) throw Error(ErrorKind::IoFailure, "write failed: " + path.string());
}

ScheduleFile load_schedule(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoFailure, "cannot open " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  ScheduleFile f;
  try {
    json j = json::parse(text);
    f.version = j.at("version").get<int>();
    if (f.version != 1)
      throw Error(ErrorKind::InvalidSchedule, "unsupported schedule version " + std::to_string(f.version));
    if (j.contains("alpha")) f.alpha = j["alpha"].get<double>();
    if (j.contains("grid_step")) f.grid_step = j["grid_step"].get<double>();
    f.schedule.thresholds = j.at("thresholds").get<std::vector<double>>();
    if (j.contains("calibration_fingerprint"))
      f.calibration_fingerprint =
          std::stoull(j["calibration_fingerprint"].get<std::string>(), nullptr, 16);
    if (j.contains("allow_same_split")) f.allow_same_split = j["allow_same_split"].get<bool>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidSchedule, path.string() + ": " + e.what());
  } catch (const std::logic_error& e) {
    throw Error(ErrorKind::InvalidSchedule, path.string() + ": bad fingerprint");
  }
  return f;
}

}  // namespace flexens
