#include "doctest.h"

#include <cmath>
#include <random>

#include "flexens/cascade.hpp"
#include "flexens/error.hpp"
#include "flexens/metrics.hpp"
#include "flexens/synthgen.hpp"
#include "test_support.hpp"

using namespace flexens;

namespace {

void check_trace_invariants(const CascadeTrace& t, const ThresholdSchedule& s,
                            std::span<const double> costs) {
  const std::size_t n = costs.size();
  REQUIRE(t.models_used >= 1);
  REQUIRE(t.models_used <= n);
  REQUIRE(t.margins.size() == t.models_used);
  double cost = 0.0;
  for (std::size_t i = 0; i < t.models_used; ++i) cost += costs[i];
  CHECK(t.cost_ms == cost);
  for (std::size_t k = 1; k < t.models_used; ++k) CHECK(t.margins[k - 1] < s.thresholds[k - 1]);
  if (t.models_used < n) CHECK(t.margins.back() >= s.thresholds[t.models_used - 1]);
}

}  // namespace

TEST_CASE("hand-computed three-model example stops after the first model") {
  std::vector<std::vector<double>> logits{{2, 0}, {0, 2}, {4, 0}};
  ThresholdSchedule s{{0.7, 0.7}};
  std::vector<double> costs{1, 1, 1};
  auto t = run_sample(logits, s, costs);
  auto p = testing::ref_softmax({2, 0});
  const double expected = p[0] - p[1];  // tanh(1)
  CHECK(std::abs(expected - 0.7616) < 1e-4);
  CHECK(t.models_used == 1);
  CHECK(t.prediction == 0);
  CHECK(std::abs(t.margins[0] - expected) < 1e-12);
  CHECK(t.cost_ms == 1.0);
}

TEST_CASE("unreachable thresholds run the full ensemble") {
  std::mt19937_64 rng(17);
  auto d = testing::random_dataset(rng, 4, 200, 5);
  auto traces = run_dataset(d, ThresholdSchedule::uniform(4, 1.0));
  auto full = full_ensemble_predictions(d);
  for (std::size_t s = 0; s < traces.size(); ++s) {
    CHECK(traces[s].models_used == 4);
    CHECK(traces[s].prediction == full[s]);
  }
}

TEST_CASE("zero thresholds stop after model 1") {
  std::mt19937_64 rng(18);
  auto d = testing::random_dataset(rng, 4, 200, 5);
  auto traces = run_dataset(d, ThresholdSchedule::uniform(4, 0.0));
  for (std::size_t s = 0; s < traces.size(); ++s) {
    CHECK(traces[s].models_used == 1);
    auto row = d.logits(0, s);
    CHECK(traces[s].prediction == testing::ref_argmax({row.begin(), row.end()}));
  }
}

TEST_CASE("single-model ensemble takes an empty schedule") {
  std::mt19937_64 rng(19);
  auto d = testing::random_dataset(rng, 1, 50, 3);
  auto traces = run_dataset(d, ThresholdSchedule{});
  for (const auto& t : traces) CHECK(t.models_used == 1);
}

TEST_CASE("schedule validation") {
  std::mt19937_64 rng(20);
  auto d = testing::random_dataset(rng, 3, 10, 3);
  try {
    run_dataset(d, ThresholdSchedule{{0.5}});
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ScheduleLengthMismatch);
  }
  try {
    run_dataset(d, ThresholdSchedule{{0.5, 1.5}});
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidSchedule);
  }
  CHECK_THROWS_AS(run_dataset(d, ThresholdSchedule{{0.5, std::nan("")}}), Error);

  std::vector<std::vector<double>> ragged{{1, 2}, {1, 2, 3}};
  std::vector<double> costs{1, 1};
  try {
    run_sample(ragged, ThresholdSchedule{{0.5}}, costs);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DimensionMismatch);
  }
}

TEST_CASE("traces match the reference cascade and satisfy their invariants") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> tau(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    auto d = testing::random_dataset(rng, 5, 60, 4);
    ThresholdSchedule s;
    for (int k = 0; k < 4; ++k) s.thresholds.push_back(tau(rng));
    auto traces = run_dataset(d, s);
    REQUIRE(traces.size() == d.num_samples());
    for (std::size_t m = 0; m < traces.size(); ++m) {
      check_trace_invariants(traces[m], s, d.costs_ms());
      auto ref = testing::ref_cascade(d, m, s.thresholds);
      CHECK(traces[m].models_used == ref.models_used);
      CHECK(traces[m].prediction == ref.prediction);
      for (std::size_t k = 0; k < ref.margins.size(); ++k)
        CHECK(std::abs(traces[m].margins[k] - ref.margins[k]) < 1e-12);

      auto single = run_sample(d, m, s);
      CHECK(single.models_used == traces[m].models_used);
      CHECK(single.margins == traces[m].margins);
    }
  }
}

TEST_CASE("raising one threshold never shortens a cascade") {
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    auto d = testing::random_dataset(rng, 4, 40, 3);
    ThresholdSchedule s;
    for (int k = 0; k < 3; ++k) s.thresholds.push_back(unit(rng));
    ThresholdSchedule raised = s;
    auto k = static_cast<std::size_t>(trial % 3);
    raised.thresholds[k] = std::min(1.0, raised.thresholds[k] + unit(rng) * 0.5);
    auto a = run_dataset(d, s);
    auto b = run_dataset(d, raised);
    for (std::size_t m = 0; m < a.size(); ++m) CHECK(b[m].models_used >= a[m].models_used);
  }
}

TEST_CASE("decisions depend only on the models consumed") {
  std::mt19937_64 rng(23);
  auto d = testing::random_dataset(rng, 4, 80, 3, true);
  ThresholdSchedule s{{0.3, 0.4, 0.5}};
  auto traces = run_dataset(d, s);
  // Scramble every logit of models the cascade did not reach.
  std::vector<float> logits(d.all_logits().begin(), d.all_logits().end());
  std::normal_distribution<float> junk(0.0f, 50.0f);
  for (std::size_t m = 0; m < d.num_samples(); ++m)
    for (std::size_t i = traces[m].models_used; i < d.num_models(); ++i)
      for (std::size_t c = 0; c < d.num_classes(); ++c)
        logits[(i * d.num_samples() + m) * d.num_classes() + c] = junk(rng);
  EnsembleDataset scrambled(d.num_models(), d.num_samples(), d.num_classes(), logits,
                            {d.labels().begin(), d.labels().end()},
                            {d.costs_ms().begin(), d.costs_ms().end()});
  auto again = run_dataset(scrambled, s);
  for (std::size_t m = 0; m < traces.size(); ++m) {
    CHECK(again[m].models_used == traces[m].models_used);
    CHECK(again[m].prediction == traces[m].prediction);
    CHECK(again[m].margins == traces[m].margins);
  }
}

TEST_CASE("stage table agrees bit-for-bit with traces") {
  SynthConfig cfg;
  cfg.num_samples = 1000;
  auto d = generate(cfg);
  StageTable table(d);
  for (double t : {0.0, 0.1, 0.3, 0.6, 1.0}) {
    auto s = ThresholdSchedule::uniform(d.num_models(), t);
    auto traces = run_dataset(d, s);
    for (std::size_t m = 0; m < traces.size(); ++m) {
      const auto used = table.models_used(m, s.thresholds);
      CHECK(used == traces[m].models_used);
      CHECK(table.prediction(m, used) == traces[m].prediction);
      for (std::size_t k = 1; k <= used; ++k) CHECK(table.margin(m, k) == traces[m].margins[k - 1]);
      CHECK(table.prefix_cost(used) == traces[m].cost_ms);
    }
  }
}

TEST_CASE("tau = 1 runs every model even for saturated softmax") {
  std::vector<std::vector<double>> logits{{900, 0}, {0, 5}, {0, 950}};
  std::vector<double> costs{1, 1, 1};
  auto t = run_sample(logits, ThresholdSchedule{{1.0, 1.0}}, costs);
  CHECK(t.models_used == 3);
  CHECK(t.prediction == 1);
  for (double m : t.margins) CHECK(m < 1.0);
}
