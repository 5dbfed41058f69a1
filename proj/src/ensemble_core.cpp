#include "flexens/ensemble_core.hpp"

#include <cmath>

#include "flexens/error.hpp"

namespace flexens {

void softmax_into(std::span<const double> z, std::span<double> out) {
  double hi = z[0];
  for (double v : z) hi = v > hi ? v : hi;
  double sum = 0.0;
  for (std::size_t j = 0; j < z.size(); ++j) {
    out[j] = std::exp(z[j] - hi);
    sum += out[j];
  }
  const double inv = 1.0 / sum;
  for (double& v : out) v *= inv;
}

ProbabilityVector softmax(std::span<const double> z) {
  if (z.size() < 2) throw Error(ErrorKind::TooFewClasses, "softmax needs at least 2 classes");
  for (std::size_t j = 0; j < z.size(); ++j)
    if (!std::isfinite(z[j]))
      throw Error(ErrorKind::NonFiniteInput, "softmax input " + std::to_string(j) + " is not finite");
  ProbabilityVector p{std::vector<double>(z.size())};
  softmax_into(z, p.values);
  return p;
}

AveragedLogits average_logits(std::span<const std::vector<double>> vectors) {
  if (vectors.empty()) throw Error(ErrorKind::EmptyList, "average_logits needs at least one vector");
  const std::size_t c = vectors.front().size();
  RunningAverage avg(c);
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    const auto& v = vectors[i];
    if (v.size() != c)
      throw Error(ErrorKind::LengthMismatch, "vector " + std::to_string(i) + " has length " +
                                                 std::to_string(v.size()) + ", expected " +
                                                 std::to_string(c));
    for (double x : v)
      if (!std::isfinite(x))
        throw Error(ErrorKind::NonFiniteInput, "vector " + std::to_string(i) + " is not finite");
    avg.add(std::span<const double>(v));
  }
  auto values = avg.values();
  return {std::vector<double>(values.begin(), values.end()), avg.count()};
}

std::size_t predict(std::span<const double> p) {
  if (p.empty()) throw Error(ErrorKind::TooFewClasses, "predict on empty vector");
  std::size_t best = 0;
  for (std::size_t j = 1; j < p.size(); ++j)
    if (p[j] > p[best]) best = j;
  return best;
}

double score_margin(std::span<const double> p) {
  if (p.size() < 2) throw Error(ErrorKind::TooFewClasses, "score margin needs at least 2 classes");
  double m0 = p[0] >= p[1] ? p[0] : p[1];
  double m1 = p[0] >= p[1] ? p[1] : p[0];
  for (std::size_t j = 2; j < p.size(); ++j) {
    if (p[j] > m0) {
      m1 = m0;
      m0 = p[j];
    } else if (p[j] > m1) {
      m1 = p[j];
    }
  }
  return m0 - m1;
}

double probability_margin(std::span<const double> p) {
  const double margin = score_margin(p);
  return margin < kMaxProbabilityMargin ? margin : kMaxProbabilityMargin;
}

}  // namespace flexens
