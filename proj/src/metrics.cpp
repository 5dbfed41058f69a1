#include "flexens/metrics.hpp"

#include <cstdio>
#include <ostream>

#include "flexens/ensemble_core.hpp"
#include "flexens/error.hpp"

namespace flexens {

double relative_error_increase(std::size_t wrong, std::size_t wrong_full, std::size_t num_samples) {
  if (wrong_full == 0) return static_cast<double>(wrong) / static_cast<double>(num_samples);
  return (static_cast<double>(wrong) - static_cast<double>(wrong_full)) /
         static_cast<double>(wrong_full);
}

EvaluationReport summarize(const ExitSummary& summary, std::span<const double> prefix_cost,
                           std::size_t wrong_full) {
  const std::size_t n = summary.exit_counts.size();
  std::size_t m = 0;
  for (auto count : summary.exit_counts) m += count;
  const double total = static_cast<double>(m);

  EvaluationReport r;
  r.per_stage_exit_counts = summary.exit_counts;
  r.num_wrong = summary.num_wrong;
  r.accuracy = static_cast<double>(m - summary.num_wrong) / total;
  // Fractions times prefix costs: a single populated stage reproduces its
  // prefix cost exactly, which makes R == 1 exact for full execution.
  std::size_t weighted_models = 0;
  for (std::size_t k = 1; k <= n; ++k) {
    const auto count = summary.exit_counts[k - 1];
    if (count == 0) continue;
    r.avg_cost_ms += (static_cast<double>(count) / total) * prefix_cost[k];
    weighted_models += k * count;
  }
  r.avg_models = static_cast<double>(weighted_models) / total;
  r.R = r.avg_cost_ms / prefix_cost[n];
  r.E = relative_error_increase(summary.num_wrong, wrong_full, m);
  return r;
}

std::vector<std::size_t> full_ensemble_predictions(const EnsembleDataset& dataset) {
  auto traces = run_dataset(dataset, ThresholdSchedule::uniform(dataset.num_models(), 1.0));
  std::vector<std::size_t> out;
  out.reserve(traces.size());
  for (const auto& t : traces) out.push_back(t.prediction);
  return out;
}

std::size_t full_ensemble_errors(const EnsembleDataset& dataset) {
  auto preds = full_ensemble_predictions(dataset);
  std::size_t wrong = 0;
  for (std::size_t m = 0; m < preds.size(); ++m) wrong += preds[m] != dataset.labels()[m];
  return wrong;
}

EvaluationReport report(const EnsembleDataset& dataset, std::span<const CascadeTrace> traces,
                        std::size_t wrong_full) {
  if (traces.size() != dataset.num_samples())
    throw Error(ErrorKind::LengthMismatch, "got " + std::to_string(traces.size()) +
                                               " traces for " +
                                               std::to_string(dataset.num_samples()) + " samples");
  ExitSummary s;
  s.exit_counts.assign(dataset.num_models(), 0);
  for (std::size_t m = 0; m < traces.size(); ++m) {
    const auto used = traces[m].models_used;
    if (used < 1 || used > dataset.num_models())
      throw Error(ErrorKind::LengthMismatch, "trace " + std::to_string(m) + " has models_used out of range");
    ++s.exit_counts[used - 1];
    s.num_wrong += traces[m].prediction != dataset.labels()[m];
  }
  return summarize(s, prefix_costs(dataset.costs_ms()), wrong_full);
}

EvaluationReport report(const EnsembleDataset& dataset, std::span<const CascadeTrace> traces) {
  if (traces.size() != dataset.num_samples())
    throw Error(ErrorKind::LengthMismatch, "got " + std::to_string(traces.size()) +
                                               " traces for " +
                                               std::to_string(dataset.num_samples()) + " samples");
  return report(dataset, traces, full_ensemble_errors(dataset));
}

MarginHistogram margin_histogram(const EnsembleDataset& dataset, std::size_t ensemble_size,
                                 std::size_t bins) {
  if (ensemble_size < 1 || ensemble_size > dataset.num_models())
    throw Error(ErrorKind::InvalidEnsembleSize,
                "ensemble size " + std::to_string(ensemble_size) + " not in [1, " +
                    std::to_string(dataset.num_models()) + "]");
  if (bins < 1) throw Error(ErrorKind::InvalidArgument, "bins must be >= 1");

  MarginHistogram h;
  h.bin_edges.resize(bins + 1);
  for (std::size_t b = 0; b <= bins; ++b)
    h.bin_edges[b] = static_cast<double>(b) / static_cast<double>(bins);
  h.correct_counts.assign(bins, 0);
  h.wrong_counts.assign(bins, 0);

  const std::size_t c = dataset.num_classes();
  std::vector<double> probs(c);
  double sum_correct = 0.0, sum_wrong = 0.0;
  std::size_t n_correct = 0, n_wrong = 0;
  for (std::size_t m = 0; m < dataset.num_samples(); ++m) {
    RunningAverage avg(c);
    for (std::size_t i = 0; i < ensemble_size; ++i) avg.add(dataset.logits(i, m));
    softmax_into(avg.values(), probs);
    const double margin = probability_margin(probs);
    auto bin = static_cast<std::size_t>(margin * static_cast<double>(bins));
    if (bin >= bins) bin = bins - 1;
    if (predict(probs) == dataset.labels()[m]) {
      ++h.correct_counts[bin];
      sum_correct += margin;
      ++n_correct;
    } else {
      ++h.wrong_counts[bin];
      sum_wrong += margin;
      ++n_wrong;
    }
  }
  if (n_correct) h.mean_margin_correct = sum_correct / static_cast<double>(n_correct);
  if (n_wrong) h.mean_margin_wrong = sum_wrong / static_cast<double>(n_wrong);
  return h;
}

SweepRow to_row(const std::string& config, const EvaluationReport& r) {
  return {config, r.accuracy, r.avg_cost_ms, r.R, r.E, r.avg_models};
}

std::vector<SweepRow> ensemble_size_sweep(const EnsembleDataset& dataset) {
  const StageTable table(dataset);
  const std::size_t n = dataset.num_models();
  const std::size_t m = dataset.num_samples();
  std::vector<std::size_t> wrong(n + 1, 0);
  for (std::size_t s = 0; s < m; ++s)
    for (std::size_t k = 1; k <= n; ++k) wrong[k] += table.prediction(s, k) != dataset.labels()[s];

  std::vector<double> prefix(n + 1);
  for (std::size_t k = 0; k <= n; ++k) prefix[k] = table.prefix_cost(k);

  std::vector<SweepRow> rows;
  for (std::size_t k = 1; k <= n; ++k) {
    ExitSummary s;
    s.exit_counts.assign(n, 0);
    s.exit_counts[k - 1] = m;
    s.num_wrong = wrong[k];
    rows.push_back(to_row(std::to_string(k), summarize(s, prefix, wrong[n])));
  }
  return rows;
}

std::vector<SweepRow> flexible_sweep(const EnsembleDataset& dataset,
                                     std::span<const NamedSchedule> schedules) {
  const std::size_t wrong_full = full_ensemble_errors(dataset);
  std::vector<SweepRow> rows;
  for (const auto& named : schedules) {
    auto traces = run_dataset(dataset, named.schedule);
    rows.push_back(to_row(named.name, report(dataset, traces, wrong_full)));
  }
  return rows;
}

std::string format_real(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", value);
  return buf;
}

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows) {
  out << "config,accuracy,avg_cost_ms,R,E,avg_models\n";
  for (const auto& r : rows)
    out << r.config << ',' << format_real(r.accuracy) << ',' << format_real(r.avg_cost_ms) << ','
        << format_real(r.R) << ',' << format_real(r.E) << ',' << format_real(r.avg_models) << '\n';
}

void write_histogram_csv(std::ostream& out, const MarginHistogram& h) {
  out << "bin_lo,bin_hi,correct,wrong\n";
  for (std::size_t b = 0; b < h.correct_counts.size(); ++b)
    out << format_real(h.bin_edges[b]) << ',' << format_real(h.bin_edges[b + 1]) << ','
        << h.correct_counts[b] << ',' << h.wrong_counts[b] << '\n';
}

}  // namespace flexens
