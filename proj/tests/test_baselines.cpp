#include <doctest.h>

#include <cmath>
#include <memory>
#include <numeric>
#include <random>

#include "cdsplit/baselines.hpp"
#include "cdsplit/cd_split.hpp"
#include "cdsplit/simulation.hpp"

using namespace cdsplit;

namespace {

constexpr double kZ95 = 1.6448536269514722;

double width(const Band& b) {
  REQUIRE(b.count() == 1);
  return b.intervals()[0].hi - b.intervals()[0].lo;
}

double midpoint(const Band& b) {
  REQUIRE(b.count() == 1);
  return 0.5 * (b.intervals()[0].hi + b.intervals()[0].lo);
}

Scenario kind(ScenarioKind k) {
  Scenario s;
  s.kind = k;
  return s;
}

}  // namespace

TEST_CASE("reg-split with a noiseless fit has zero width") {
  const Dataset calib = sample_scenario(kind(ScenarioKind::Homoscedastic), 100, 1);
  Dataset exact;
  for (const auto& s : calib) exact.push_back(Sample{s.features, 2.0 * s.features[0]});
  const auto c = calibrate_reg_split([](std::span<const double> x) { return 2.0 * x[0]; }, exact, 0.1);
  CHECK(width(reg_split_band(c, std::vector<double>{0.3})) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("reg-split width is the 91st smallest of 1..100") {
  Dataset calib;
  for (int i = 1; i <= 100; ++i) calib.push_back(Sample{{0.0}, static_cast<double>(i)});
  const auto c = calibrate_reg_split([](std::span<const double>) { return 0.0; }, calib, 0.1);
  CHECK(baseline_score_cutoff(c) == 91.0);
  const Band b = reg_split_band(c, std::vector<double>{4.0});
  CHECK(b.intervals()[0] == Interval{-91.0, 91.0});
}

TEST_CASE("reg-split with a constant centre is x-invariant") {
  const Dataset calib = sample_scenario(kind(ScenarioKind::Heteroscedastic), 200, 2);
  const auto c = calibrate_reg_split([](std::span<const double>) { return 1.5; }, calib, 0.1);
  const double w0 = width(reg_split_band(c, std::vector<double>{-4.0}));
  for (double x : {-1.0, 0.0, 2.0, 4.9}) {
    const Band b = reg_split_band(c, std::vector<double>{x});
    CHECK(midpoint(b) == doctest::Approx(1.5));
    CHECK(width(b) == doctest::Approx(w0));
  }
}

TEST_CASE("local-reg-split reduces to reg-split with unit scale and scales with rho") {
  const Dataset data = sample_scenario(kind(ScenarioKind::Heteroscedastic), 400, 3);
  const SplitPair split = split_data(data, 0.5, 4);
  const auto reg = std::make_shared<RegressionModel>(fit_regression(split.train, 20));
  const PointPredictor r = [reg](std::span<const double> x) { return reg->predict(x); };
  const auto plain = calibrate_reg_split(reg, split.calibration, 0.1);
  const auto unit = calibrate_local_reg_split(r, [](std::span<const double>) { return 1.0; }, split.calibration, 0.1);
  const auto doubled = calibrate_local_reg_split(
      r, [](std::span<const double> x) { return x[0] > 0.0 ? 2.0 : 1.0; }, split.calibration, 0.1);
  for (double x : {-3.0, -0.5, 1.0, 4.0}) {
    const std::vector<double> q{x};
    CHECK(local_reg_split_band(unit, q) == reg_split_band(plain, q));
  }
  const double q = baseline_score_cutoff(doubled);
  CHECK(width(local_reg_split_band(doubled, std::vector<double>{1.0})) == doctest::Approx(4.0 * q));
  CHECK(width(local_reg_split_band(doubled, std::vector<double>{-1.0})) == doctest::Approx(2.0 * q));
}

TEST_CASE("local-reg-split widens with |x| in the heteroscedastic scenario") {
  double narrow = 0.0;
  double wide = 0.0;
  for (int rep = 0; rep < 10; ++rep) {
    const Dataset data = sample_scenario(kind(ScenarioKind::Heteroscedastic), 2000, derive_seed(5, rep));
    const SplitPair split = split_data(data, 0.5, derive_seed(6, rep));
    const std::size_t k = 32;
    const auto reg = std::make_shared<RegressionModel>(fit_regression(split.train, k));
    const auto mad = std::make_shared<MadModel>(fit_mad(split.train, *reg, k));
    const auto c = calibrate_local_reg_split(reg, mad, split.calibration, 0.1);
    for (double x : {-0.5, 0.0, 0.5}) narrow += width(local_reg_split_band(c, std::vector<double>{x}));
    for (double x : {-4.5, 4.0, 4.5}) wide += width(local_reg_split_band(c, std::vector<double>{x}));
  }
  CHECK(wide > narrow);
}

TEST_CASE("quantile-split with exact quantiles matches the oracle interval") {
  const Scenario s = kind(ScenarioKind::Homoscedastic);
  const Dataset calib = sample_scenario(s, 5000, 7);
  const auto c = calibrate_quantile_split([](std::span<const double> x) { return x[0] - kZ95; },
                                          [](std::span<const double> x) { return x[0] + kZ95; }, calib, 0.1);
  CHECK(std::abs(baseline_score_cutoff(c)) < 0.05);
  const std::vector<double> x{2.0};
  const Band b = quantile_split_band(c, x);
  const Band oracle = oracle_interval(s, x, 0.1);
  CHECK(std::abs(b.intervals()[0].lo - oracle.intervals()[0].lo) < 0.05);
  CHECK(std::abs(b.intervals()[0].hi - oracle.intervals()[0].hi) < 0.05);
}

TEST_CASE("over-wide quantiles give a negative correction") {
  const Dataset calib = sample_scenario(kind(ScenarioKind::Homoscedastic), 500, 8);
  const auto c = calibrate_quantile_split([](std::span<const double> x) { return x[0] - 10.0; },
                                          [](std::span<const double> x) { return x[0] + 10.0; }, calib, 0.1);
  CHECK(baseline_score_cutoff(c) < 0.0);
  CHECK(width(quantile_split_band(c, std::vector<double>{0.0})) < 20.0);

  const auto cross = calibrate_quantile_split([](std::span<const double>) { return 0.0; },
                                              [](std::span<const double>) { return 0.0; },
                                              Dataset{Sample{{0.0}, 0.0}}, 0.5);
  CHECK(baseline_score_cutoff(cross) == 0.0);
}

TEST_CASE("quantile-split with k-NN quantiles on homoscedastic data") {
  // Endpoint noise is paid for by a wider conformal correction, so a large
  // neighbourhood keeps the band close to the oracle; the offset is
  // averaged over a grid of query points.
  const Scenario s = kind(ScenarioKind::Homoscedastic);
  const Dataset data = sample_scenario(s, 4000, 10);
  const SplitPair split = split_data(data, 0.5, 11);
  const auto qm = std::make_shared<QuantileModel>(fit_quantile(split.train, 200));
  const auto c = calibrate_quantile_split(qm, split.calibration, 0.1);
  double lo_err = 0.0;
  double hi_err = 0.0;
  int count = 0;
  for (double x = -4.5; x <= 4.5; x += 0.05) {
    const Band b = quantile_split_band(c, std::vector<double>{x});
    REQUIRE(b.count() == 1);
    lo_err += b.intervals()[0].lo - (x - kZ95);
    hi_err += b.intervals()[0].hi - (x + kZ95);
    ++count;
  }
  CHECK(std::abs(lo_err / count) < 0.1);
  CHECK(std::abs(hi_err / count) < 0.1);
}

TEST_CASE("baselines cover at the nominal level") {
  const Scenario s = kind(ScenarioKind::Heteroscedastic);
  const int reps = 40;
  const std::size_t n = 500;
  const std::size_t n_test = 200;
  std::size_t hits[3] = {0, 0, 0};
  for (int rep = 0; rep < reps; ++rep) {
    const Dataset data = sample_scenario(s, n, derive_seed(20, rep));
    const SplitPair split = split_data(data, 0.5, derive_seed(21, rep));
    const std::size_t k = 16;
    const auto reg = std::make_shared<RegressionModel>(fit_regression(split.train, k));
    const auto mad = std::make_shared<MadModel>(fit_mad(split.train, *reg, k));
    const auto qm = std::make_shared<QuantileModel>(fit_quantile(split.train, k));
    const auto a = calibrate_reg_split(reg, split.calibration, 0.1);
    const auto b = calibrate_local_reg_split(reg, mad, split.calibration, 0.1);
    const auto c = calibrate_quantile_split(qm, split.calibration, 0.1);
    for (const auto& t : sample_scenario(s, n_test, derive_seed(22, rep))) {
      hits[0] += band_contains(reg_split_band(a, t.features), t.target) ? 1 : 0;
      hits[1] += band_contains(local_reg_split_band(b, t.features), t.target) ? 1 : 0;
      hits[2] += band_contains(quantile_split_band(c, t.features), t.target) ? 1 : 0;
    }
  }
  const double total = static_cast<double>(reps) * n_test;
  const double m = static_cast<double>(n) / 2.0;
  const double se = std::sqrt(0.09 / total + 0.09 / (m + 2) / reps);
  for (std::size_t h : hits) CHECK(static_cast<double>(h) / total >= 0.9 - 3 * se);
}

TEST_CASE("band functions reject a calibration of another method") {
  const Dataset calib{Sample{{0.0}, 1.0}};
  const auto c = calibrate_reg_split([](std::span<const double>) { return 0.0; }, calib, 0.1);
  CHECK_THROWS_AS(local_reg_split_band(c, std::vector<double>{0.0}), InvalidArgument);
  CHECK_THROWS_AS(quantile_split_band(c, std::vector<double>{0.0}), InvalidArgument);
  CHECK_THROWS_AS(reg_split_band(calibrate_reg_split([](std::span<const double>) { return 0.0; }, Dataset{}, 0.1),
                                 std::vector<double>{0.0}),
                  InsufficientData);
}

TEST_CASE("probability-split equals CD-split with one cell") {
  Scenario s = kind(ScenarioKind::LogisticClassification);
  const Dataset data = sample_scenario(s, 800, 30);
  const SplitPair split = split_data(data, 0.5, 31);
  const auto clf = std::make_shared<ClassifierModel>(fit_classifier(split.train, s.num_classes()));
  const auto ps = calibrate_probability_split(clf, split.calibration, 0.1);
  const auto cd = calibrate_cd_split_classifier(clf, split.calibration, 1, 0.1, 5);
  for (const auto& t : sample_scenario(s, 300, 32)) {
    CHECK(probability_split_labelset(ps, t.features).labels() == cd_split_labelset(cd, t.features).labels());
  }
}

TEST_CASE("probability-split degenerate cases") {
  // One calibration point has floor rank 0, so every label is kept.
  const std::vector<std::vector<double>> coef{{0.0, 0.0}, {0.0, 0.0}, {0.0, 0.0}};
  const auto flat = std::make_shared<ClassifierModel>(coef, 1);
  const auto all = calibrate_probability_split(flat, Dataset{Sample{{0.0}, 1.0}}, 0.1);
  CHECK(probability_split_labelset(all, std::vector<double>{0.0}).labels() == std::vector<int>{0, 1, 2});

  // Near-deterministic classifier: label = 1 iff x > 0.
  const std::vector<std::vector<double>> sharp{{200.0, 0.0}, {0.0, 0.0}};
  const auto clf = std::make_shared<ClassifierModel>(sharp, 1);
  Dataset calib;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.5, 3.0);
  for (int i = 0; i < 100; ++i) {
    const double x = (i % 2 == 0 ? 1.0 : -1.0) * u(rng);
    calib.push_back(Sample{{x}, x > 0.0 ? 0.0 : 1.0});
  }
  const auto c = calibrate_probability_split(clf, calib, 0.1);
  CHECK(probability_split_labelset(c, std::vector<double>{2.0}).labels() == std::vector<int>{0});
  CHECK(probability_split_labelset(c, std::vector<double>{-2.0}).labels() == std::vector<int>{1});
}
