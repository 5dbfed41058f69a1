#include "doctest.h"

#include <random>

#include "flexens/calibration.hpp"
#include "flexens/error.hpp"
#include "flexens/metrics.hpp"
#include "flexens/synthgen.hpp"
#include "test_support.hpp"

using namespace flexens;

namespace {

const EnsembleDataset& seed42() {
  static const EnsembleDataset d = generate(SynthConfig{});
  return d;
}

EnsembleDataset small_synth(std::size_t samples, std::uint64_t seed) {
  SynthConfig cfg;
  cfg.num_models = 4;
  cfg.num_samples = samples;
  cfg.seed = seed;
  return generate(cfg);
}

}  // namespace

TEST_CASE("objective of full execution") {
  std::mt19937_64 rng(31);
  auto d = testing::random_dataset(rng, 4, 100, 5);
  for (double alpha : {0.0, 0.3, 0.5, 1.0}) {
    auto o = evaluate_objective(d, ThresholdSchedule::uniform(4, 1.0), alpha);
    CHECK(o.R == 1.0);
    CHECK(o.E == 0.0);
    CHECK(o.M == alpha);
  }
}

TEST_CASE("objective of always-stop under uniform costs") {
  std::mt19937_64 rng(32);
  for (std::size_t n : {2u, 3u, 4u, 5u, 8u}) {
    auto d = testing::random_dataset(rng, n, 50, 3, true);
    auto o = evaluate_objective(d, ThresholdSchedule::uniform(n, 0.0), 0.5);
    CHECK(o.R == 1.0 / static_cast<double>(n));
  }
  auto o = evaluate_objective(seed42(), ThresholdSchedule::uniform(7, 0.0), 0.5);
  CHECK(o.R == 1.0 / 7.0);
}

TEST_CASE("seed-42 objective at tau = 0.5") {
  const auto& d = seed42();
  auto o = evaluate_objective(d, ThresholdSchedule::uniform(7, 0.5), 0.5);
  testing::RefStages ref(d);
  auto r = testing::ref_objective(ref, std::vector<double>(6, 0.5), 0.5);
  CHECK(r.wrong == 1481);
  CHECK(std::abs(o.R - r.R) < 1e-12);
  CHECK(std::abs(o.E - r.E) < 1e-12);
  CHECK(std::abs(o.M - r.M) < 1e-12);
  // Frozen from the first run; E = 31/1450.
  CHECK(o.R == 0.67438571428571437);
  CHECK(o.E == 0.021379310344827585);
  CHECK(o.M == 0.34788251231527095);
  CHECK(std::abs(o.M - objective_value(0.5, o.R, o.E)) < 1e-12);
}

TEST_CASE("E falls back to absolute error when the full ensemble is perfect") {
  // Two models, two samples. Full ensemble right on both; the first model alone
  // misclassifies the second sample.
  EnsembleDataset d(2, 2, 2, {5, 0, 0, 5, 5, 0, 9, 0}, {0, 0}, {1.0, 1.0});
  auto o = evaluate_objective(d, ThresholdSchedule::uniform(2, 0.0), 0.5);
  CHECK(o.E == 0.5);
  CHECK(o.R == 0.5);
  CHECK(o.M == 0.5);
}

TEST_CASE("grid spec") {
  CHECK(GridSpec().size() == 101);
  CHECK(GridSpec().value(0) == 0.0);
  CHECK(GridSpec().value(100) == 1.0);
  CHECK(GridSpec().value(50) == 0.5);
  CHECK(GridSpec(1.0).size() == 2);
  CHECK(GridSpec(0.25).size() == 5);
  CHECK(GridSpec(0.001).size() == 1001);
  CHECK_THROWS_AS(GridSpec(0.3), Error);
  CHECK_THROWS_AS(GridSpec(0.0), Error);
  CHECK_THROWS_AS(GridSpec(1.5), Error);
}

TEST_CASE("calibration needs two models and a valid alpha") {
  std::mt19937_64 rng(33);
  auto one = testing::random_dataset(rng, 1, 10, 3);
  try {
    calibrate(one, 0.5);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::SingleModelEnsemble);
  }
  auto two = testing::random_dataset(rng, 2, 10, 3);
  CHECK_THROWS_AS(calibrate(two, 1.5), Error);
  CHECK_THROWS_AS(calibrate(two, -0.1), Error);
}

TEST_CASE("latency-only calibration stops immediately") {
  auto d = small_synth(2000, 5);
  auto s = calibrate(d, 1.0);
  for (double t : s.thresholds) CHECK(t == 0.0);
  auto o = evaluate_objective(d, s, 1.0);
  CHECK(o.R == 0.25);
}

TEST_CASE("error-only calibration picks the lowest zero-increase thresholds") {
  auto d = small_synth(2000, 6);
  GridSpec grid;
  auto result = calibrate_detailed(d, 0.0, grid);
  CHECK(result.objective.E <= 0.0);
  StageTable table(d);
  const std::size_t wrong_full = full_ensemble_errors(d);
  auto context = ThresholdSchedule::uniform(4, 1.0);
  for (std::size_t k = 1; k < 4; ++k) {
    double min_e = 1e300;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      context.thresholds[k - 1] = grid.value(i);
      min_e = std::min(min_e, evaluate_objective(d, context, 0.0).E);
    }
    double lowest = -1.0;
    for (std::size_t i = 0; i < grid.size() && lowest < 0.0; ++i) {
      context.thresholds[k - 1] = grid.value(i);
      if (evaluate_objective(table, d.labels(), wrong_full, context, 0.0).E == min_e)
        lowest = grid.value(i);
    }
    CHECK(result.schedule.thresholds[k - 1] == lowest);
    context.thresholds[k - 1] = result.schedule.thresholds[k - 1];
  }
}

TEST_CASE("table replay matches the cascade-based objective bit-for-bit") {
  auto d = small_synth(1500, 9);
  StageTable table(d);
  const std::size_t wrong_full = full_ensemble_errors(d);
  std::mt19937_64 rng(34);
  std::uniform_int_distribution<int> idx(0, 100);
  for (int trial = 0; trial < 25; ++trial) {
    ThresholdSchedule s;
    for (int k = 0; k < 3; ++k) s.thresholds.push_back(idx(rng) / 100.0);
    for (double alpha : {0.0, 0.5, 1.0}) {
      auto a = evaluate_objective(d, s, alpha);
      auto b = evaluate_objective(table, d.labels(), wrong_full, s, alpha);
      CHECK(a.R == b.R);
      CHECK(a.E == b.E);
      CHECK(a.M == b.M);
    }
  }
}

TEST_CASE("seed-42 calibration at alpha = 0.5") {
  const auto& d = seed42();
  auto result = calibrate_detailed(d, 0.5);
  const std::vector<double> expected{0.37, 0.2, 0.11, 0.11, 0.08, 0.08};
  CHECK(result.schedule.thresholds == expected);
  CHECK(result.objective.R == 0.41464285714285715);
  CHECK(result.objective.E == 0.16896551724137931);
  CHECK(result.objective.M == 0.2918041871921182);

  testing::RefStages ref(d);
  CHECK(testing::ref_greedy(ref, 0.5, 100) == expected);

  SUBCASE("deterministic") { CHECK(calibrate(d, 0.5) == result.schedule); }
  SUBCASE("no worse than the trivial schedules") {
    CHECK(result.objective.M <= evaluate_objective(d, ThresholdSchedule::uniform(7, 1.0), 0.5).M);
    CHECK(result.objective.M <= evaluate_objective(d, ThresholdSchedule::uniform(7, 0.0), 0.5).M);
  }
  SUBCASE("recorded stage curves are minimized by the choice") {
    for (std::size_t k = 0; k < result.stage_objectives.size(); ++k) {
      const auto& curve = result.stage_objectives[k];
      const auto chosen = static_cast<std::size_t>(std::lround(expected[k] * 100));
      for (std::size_t i = 0; i < curve.size(); ++i) {
        CHECK(curve[i] >= curve[chosen]);
        if (i < chosen) CHECK(curve[i] > curve[chosen]);
      }
    }
  }
}

TEST_CASE("schedule JSON") {
  testing::TempDir tmp;
  ScheduleFile f;
  f.alpha = 0.5;
  f.grid_step = 0.01;
  f.schedule.thresholds = {0.37, 0.2, 0.11};
  save_schedule(f, tmp / "s.json");
  auto text = testing::file_bytes(tmp / "s.json");
  CHECK(std::string(text.begin(), text.end()) ==
        "{\"version\":1,\"alpha\":0.5,\"grid_step\":0.01,\"thresholds\":[0.37,0.2,0.11]}\n");
  auto back = load_schedule(tmp / "s.json");
  CHECK(back.schedule == f.schedule);
  CHECK(back.alpha == 0.5);
  CHECK_FALSE(back.calibration_fingerprint.has_value());

  f.calibration_fingerprint = 0x0123456789abcdefull;
  f.allow_same_split = true;
  save_schedule(f, tmp / "t.json");
  back = load_schedule(tmp / "t.json");
  CHECK(back.calibration_fingerprint == 0x0123456789abcdefull);
  CHECK(back.allow_same_split);

  testing::write_text(tmp / "u.json", R"({"version":1,"thresholds":[1.0,1.0]})");
  back = load_schedule(tmp / "u.json");
  CHECK(back.schedule.thresholds.size() == 2);
  CHECK_FALSE(back.alpha.has_value());

  testing::write_text(tmp / "bad.json", R"({"version":2,"thresholds":[]})");
  CHECK_THROWS_AS(load_schedule(tmp / "bad.json"), Error);
  testing::write_text(tmp / "bad2.json", R"({"version":1})");
  CHECK_THROWS_AS(load_schedule(tmp / "bad2.json"), Error);
}
