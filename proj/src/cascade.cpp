#include "flexens/cascade.hpp"

#include <cmath>
#include <sstream>

#include "flexens/ensemble_core.hpp"
#include "flexens/error.hpp"

namespace flexens {

namespace {

// Shared body of every cascade entry point. `logits_of(i)` returns the span
// of model i's logits for the sample being processed.
template <typename LogitsOf>
CascadeTrace cascade(LogitsOf logits_of, std::size_t num_models, std::size_t num_classes,
                     std::span<const double> thresholds, std::span<const double> costs) {
  CascadeTrace trace;
  trace.margins.reserve(num_models);
  RunningAverage avg(num_classes);
  std::vector<double> probs(num_classes);
  for (std::size_t k = 1; k <= num_models; ++k) {
    avg.add(logits_of(k - 1));
    trace.cost_ms += costs[k - 1];
    softmax_into(avg.values(), probs);
    const double margin = probability_margin(probs);
    trace.margins.push_back(margin);
    if (k == num_models || margin >= thresholds[k - 1]) {
      trace.models_used = k;
      trace.prediction = predict(probs);
      break;
    }
  }
  return trace;
}

}  // namespace

ThresholdSchedule ThresholdSchedule::uniform(std::size_t num_models, double tau) {
  return {std::vector<double>(num_models > 0 ? num_models - 1 : 0, tau)};
}

void ThresholdSchedule::validate(std::size_t num_models) const {
  if (thresholds.size() + 1 != num_models) {
    std::ostringstream os;
    os << "schedule has " << thresholds.size() << " thresholds, ensemble of " << num_models
       << " needs " << (num_models ? num_models - 1 : 0);
    throw Error(ErrorKind::ScheduleLengthMismatch, os.str());
  }
  for (std::size_t k = 0; k < thresholds.size(); ++k) {
    const double t = thresholds[k];
    if (!(t >= 0.0 && t <= 1.0)) {
      std::ostringstream os;
      os << "threshold " << (k + 1) << " = " << t << " outside [0,1]";
      throw Error(ErrorKind::InvalidSchedule, os.str());
    }
  }
}

std::vector<double> prefix_costs(std::span<const double> costs_ms) {
  std::vector<double> prefix(costs_ms.size() + 1, 0.0);
  double acc = 0.0;
  for (std::size_t i = 0; i < costs_ms.size(); ++i) {
    acc += costs_ms[i];
    prefix[i + 1] = acc;
  }
  return prefix;
}

CascadeTrace run_sample(std::span<const std::vector<double>> logits_per_model,
                        const ThresholdSchedule& schedule, std::span<const double> costs_ms) {
  const std::size_t n = logits_per_model.size();
  if (n == 0) throw Error(ErrorKind::DimensionMismatch, "no model logits given");
  if (costs_ms.size() != n)
    throw Error(ErrorKind::DimensionMismatch, "cost vector length differs from model count");
  const std::size_t c = logits_per_model.front().size();
  if (c < 2) throw Error(ErrorKind::DimensionMismatch, "need at least 2 classes");
  for (std::size_t i = 0; i < n; ++i) {
    if (logits_per_model[i].size() != c)
      throw Error(ErrorKind::DimensionMismatch,
                  "model " + std::to_string(i) + " logit length differs from model 0");
    for (double v : logits_per_model[i])
      if (!std::isfinite(v))
        throw Error(ErrorKind::NonFiniteInput, "model " + std::to_string(i) + " logits not finite");
  }
  if (schedule.thresholds.size() + 1 != n)
    throw Error(ErrorKind::DimensionMismatch, "schedule length must be N-1");
  schedule.validate(n);
  return cascade(
      [&](std::size_t i) { return std::span<const double>(logits_per_model[i]); }, n, c,
      schedule.thresholds, costs_ms);
}

CascadeTrace run_sample(const EnsembleDataset& dataset, std::size_t sample,
                        const ThresholdSchedule& schedule) {
  schedule.validate(dataset.num_models());
  if (sample >= dataset.num_samples())
    throw Error(ErrorKind::InvalidArgument, "sample index out of range");
  return cascade([&](std::size_t i) { return dataset.logits(i, sample); }, dataset.num_models(),
                 dataset.num_classes(), schedule.thresholds, dataset.costs_ms());
}

std::vector<CascadeTrace> run_dataset(const EnsembleDataset& dataset,
                                      const ThresholdSchedule& schedule) {
  schedule.validate(dataset.num_models());
  std::vector<CascadeTrace> traces;
  traces.reserve(dataset.num_samples());
  for (std::size_t m = 0; m < dataset.num_samples(); ++m)
    traces.push_back(cascade([&](std::size_t i) { return dataset.logits(i, m); },
                             dataset.num_models(), dataset.num_classes(), schedule.thresholds,
                             dataset.costs_ms()));
  return traces;
}

StageTable::StageTable(const EnsembleDataset& dataset)
    : num_models_(dataset.num_models()),
      num_samples_(dataset.num_samples()),
      margins_(num_models_ * num_samples_),
      predictions_(num_models_ * num_samples_),
      prefix_cost_(prefix_costs(dataset.costs_ms())) {
  const std::size_t c = dataset.num_classes();
  std::vector<double> probs(c);
  for (std::size_t m = 0; m < num_samples_; ++m) {
    RunningAverage avg(c);
    for (std::size_t k = 1; k <= num_models_; ++k) {
      avg.add(dataset.logits(k - 1, m));
      softmax_into(avg.values(), probs);
      margins_[m * num_models_ + k - 1] = probability_margin(probs);
      predictions_[m * num_models_ + k - 1] = static_cast<std::uint32_t>(predict(probs));
    }
  }
}

}  // namespace flexens
