// metrics.hpp — accuracy/latency reports, margin histograms and CSV sweeps.
//
// Latency is modeled: a sample's cost is the sum of manifest costs of the
// models it ran. R is average flexible cost over average full-ensemble cost;
// E is the relative error increase over the full ensemble on the same data.
#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "flexens/cascade.hpp"
#include "flexens/dataset.hpp"

namespace flexens {

struct EvaluationReport {
  double accuracy = 0.0;
  double avg_cost_ms = 0.0;
  double avg_models = 0.0;
  double R = 0.0;
  double E = 0.0;
  std::vector<std::size_t> per_stage_exit_counts;  // [k-1] = samples that ran k models
  std::size_t num_wrong = 0;
};

// Aggregation shared by the trace path and the StageTable path, so both give
// bit-identical numbers from the same counts.
struct ExitSummary {
  std::vector<std::size_t> exit_counts;  // length N
  std::size_t num_wrong = 0;
};

/// E = (wrong - wrong_full) / wrong_full; if the full ensemble makes no
/// errors this falls back to the absolute error rate wrong / M.
double relative_error_increase(std::size_t wrong, std::size_t wrong_full, std::size_t num_samples);

EvaluationReport summarize(const ExitSummary& summary, std::span<const double> prefix_cost,
                           std::size_t wrong_full);

/// Number of samples the full ensemble misclassifies.
std::size_t full_ensemble_errors(const EnsembleDataset& dataset);
std::vector<std::size_t> full_ensemble_predictions(const EnsembleDataset& dataset);

EvaluationReport report(const EnsembleDataset& dataset, std::span<const CascadeTrace> traces);
/// Same, with the baseline error count already known.
EvaluationReport report(const EnsembleDataset& dataset, std::span<const CascadeTrace> traces,
                        std::size_t wrong_full);

struct MarginHistogram {
  std::vector<double> bin_edges;  // B+1 edges over [0,1]
  std::vector<std::size_t> correct_counts;
  std::vector<std::size_t> wrong_counts;
  double mean_margin_correct = 0.0;  // 0 when there are no such samples
  double mean_margin_wrong = 0.0;
};

inline constexpr std::size_t kDefaultHistogramBins = 50;

/// Margins of softmax(average of the first k models), split by correctness.
MarginHistogram margin_histogram(const EnsembleDataset& dataset, std::size_t ensemble_size,
                                 std::size_t bins = kDefaultHistogramBins);

struct SweepRow {
  std::string config;
  double accuracy = 0.0;
  double avg_cost_ms = 0.0;
  double R = 0.0;
  double E = 0.0;
  double avg_models = 0.0;
};

/// Full execution of the first k models, k = 1..N; config is "k".
std::vector<SweepRow> ensemble_size_sweep(const EnsembleDataset& dataset);

struct NamedSchedule {
  std::string name;
  ThresholdSchedule schedule;
};
std::vector<SweepRow> flexible_sweep(const EnsembleDataset& dataset,
                                     std::span<const NamedSchedule> schedules);

SweepRow to_row(const std::string& config, const EvaluationReport& report);

// CSV writers. Reals use 6 significant digits (%.6g).
void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows);
void write_histogram_csv(std::ostream& out, const MarginHistogram& histogram);
std::string format_real(double value);

}  // namespace flexens
