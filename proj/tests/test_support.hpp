// Shared fixtures and the straight-line reference cascade used as an oracle.
// Nothing here calls into the library's numeric kernels.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "flexens/dataset.hpp"

namespace testing {

class TempDir {
 public:
  explicit TempDir(const std::string& tag = "flexens") {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            (tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::vector<char> file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

/// Random dataset: Gaussian logits with a label-dependent bump so accuracy is
/// neither 0 nor 1. Costs uniform in [0.5, 2] unless `unit_costs`.
inline flexens::EnsembleDataset random_dataset(std::mt19937_64& rng, std::size_t n, std::size_t m,
                                               std::size_t c, bool unit_costs = false) {
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_int_distribution<std::uint32_t> label(0, static_cast<std::uint32_t>(c - 1));
  std::uniform_real_distribution<double> cost(0.5, 2.0);
  std::vector<std::uint32_t> labels(m);
  for (auto& y : labels) y = label(rng);
  std::vector<float> logits(n * m * c);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t s = 0; s < m; ++s)
      for (std::size_t k = 0; k < c; ++k)
        logits[(i * m + s) * c + k] =
            static_cast<float>(noise(rng) * 1.5 + (k == labels[s] ? 1.5 : 0.0));
  std::vector<double> costs(n, 1.0);
  if (!unit_costs)
    for (auto& x : costs) x = cost(rng);
  return flexens::EnsembleDataset(n, m, c, std::move(logits), std::move(labels), std::move(costs));
}

// ---- reference cascade --------------------------------------------------------

inline std::vector<double> ref_softmax(const std::vector<double>& z) {
  const double hi = *std::max_element(z.begin(), z.end());
  std::vector<double> e;
  double total = 0.0;
  for (double v : z) {
    e.push_back(std::exp(v - hi));
    total += e.back();
  }
  for (double& v : e) v = v / total;
  return e;
}

inline double ref_margin(std::vector<double> p) {
  std::sort(p.begin(), p.end(), [](double a, double b) { return a > b; });
  return p[0] - p[1];
}

inline std::size_t ref_argmax(const std::vector<double>& p) {
  return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

/// Plain sum-then-divide mean of the first k models for one sample.
inline std::vector<double> ref_mean(const flexens::EnsembleDataset& d, std::size_t sample,
                                    std::size_t k) {
  std::vector<double> sum(d.num_classes(), 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    auto row = d.logits(i, sample);
    for (std::size_t j = 0; j < sum.size(); ++j) sum[j] += static_cast<double>(row[j]);
  }
  for (double& v : sum) v /= static_cast<double>(k);
  return sum;
}

struct RefTrace {
  std::size_t models_used = 0;
  std::vector<double> margins;
  std::size_t prediction = 0;
  double cost = 0.0;
};

inline RefTrace ref_cascade(const flexens::EnsembleDataset& d, std::size_t sample,
                            const std::vector<double>& tau) {
  RefTrace t;
  const std::size_t n = d.num_models();
  for (std::size_t k = 1; k <= n; ++k) {
    auto p = ref_softmax(ref_mean(d, sample, k));
    t.margins.push_back(ref_margin(p));
    t.cost += d.costs_ms()[k - 1];
    bool stop = (k == n) || t.margins.back() >= tau[k - 1];
    if (stop) {
      t.models_used = k;
      t.prediction = ref_argmax(p);
      return t;
    }
  }
  return t;
}

/// Per-sample margin/prediction at every stage, computed with the reference
/// arithmetic, for replaying many schedules cheaply in oracle searches.
struct RefStages {
  std::size_t n = 0, m = 0;
  std::vector<double> margin;         // [m][n]
  std::vector<std::size_t> pred;      // [m][n]
  std::vector<std::uint32_t> labels;
  std::vector<double> costs;

  explicit RefStages(const flexens::EnsembleDataset& d)
      : n(d.num_models()), m(d.num_samples()), margin(n * m), pred(n * m),
        labels(d.labels().begin(), d.labels().end()), costs(d.costs_ms().begin(), d.costs_ms().end()) {
    for (std::size_t s = 0; s < m; ++s)
      for (std::size_t k = 1; k <= n; ++k) {
        auto p = ref_softmax(ref_mean(d, s, k));
        margin[s * n + k - 1] = ref_margin(p);
        pred[s * n + k - 1] = ref_argmax(p);
      }
  }

  std::size_t used(std::size_t s, const std::vector<double>& tau) const {
    for (std::size_t k = 1; k < n; ++k)
      if (margin[s * n + k - 1] >= tau[k - 1]) return k;
    return n;
  }
};

struct RefObjective {
  double R = 0, E = 0, M = 0;
  std::size_t wrong = 0;
};

/// R, E and M written out directly from their definitions.
inline RefObjective ref_objective(const RefStages& st, const std::vector<double>& tau,
                                  double alpha) {
  double full_cost = 0.0;
  for (double c : st.costs) full_cost += c;
  std::size_t wrong_full = 0, wrong = 0;
  double cost_sum = 0.0;
  for (std::size_t s = 0; s < st.m; ++s) {
    wrong_full += st.pred[s * st.n + st.n - 1] != st.labels[s];
    std::size_t k = st.used(s, tau);
    wrong += st.pred[s * st.n + k - 1] != st.labels[s];
    for (std::size_t i = 0; i < k; ++i) cost_sum += st.costs[i];
  }
  RefObjective o;
  o.wrong = wrong;
  o.R = (cost_sum / static_cast<double>(st.m)) / full_cost;
  const double err = static_cast<double>(wrong) / static_cast<double>(st.m);
  const double err_full = static_cast<double>(wrong_full) / static_cast<double>(st.m);
  o.E = wrong_full == 0 ? err : (err - err_full) / err_full;
  o.M = alpha * o.R + (1.0 - alpha) * o.E;
  return o;
}

/// Greedy forward search written independently of the library: interior
/// grid values i/steps, later stages at 1, strict improvement only.
inline std::vector<double> ref_greedy(const RefStages& st, double alpha, std::size_t steps,
                                      double tol = 1e-12) {
  std::vector<double> tau(st.n - 1, 1.0);
  for (std::size_t k = 0; k + 1 < st.n; ++k) {
    double best_m = 0.0;
    double best_t = 0.0;
    for (std::size_t i = 0; i <= steps; ++i) {
      tau[k] = static_cast<double>(i) / static_cast<double>(steps);
      double m = ref_objective(st, tau, alpha).M;
      if (i == 0 || m < best_m - tol) {
        best_m = m;
        best_t = tau[k];
      }
    }
    tau[k] = best_t;
  }
  return tau;
}

}  // namespace testing
