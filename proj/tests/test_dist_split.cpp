#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <memory>

#include "cdsplit/dist_split.hpp"
#include "cdsplit/simulation.hpp"

using namespace cdsplit;

namespace {

// F(y|x) = y on [0, 1] for every x.
class UniformModel final : public ConditionalDensity {
 public:
  UniformModel() : grid_(0.0, 1.0, 1001) {}
  const YGrid& grid() const override { return grid_; }
  std::size_t dimension() const override { return 1; }
  DensityCurve density(std::span<const double>) const override {
    return DensityCurve{grid_, std::vector<double>(grid_.size(), 1.0)};
  }

 private:
  YGrid grid_;
};

Dataset targets_at_origin(const std::vector<double>& ys) {
  Dataset out;
  for (double y : ys) out.push_back(Sample{{0.0}, y});
  return out;
}

double ks_uniform(std::vector<double> u) {
  std::sort(u.begin(), u.end());
  const double n = static_cast<double>(u.size());
  double d = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    d = std::max(d, (static_cast<double>(i) + 1.0) / n - u[i]);
    d = std::max(d, u[i] - static_cast<double>(i) / n);
  }
  return d;
}

}  // namespace

TEST_CASE("identity CDF gives identity scores") {
  const auto model = std::make_shared<UniformModel>();
  const auto calib = calibrate_dist_split(model, targets_at_origin({0.3}), 0.1);
  REQUIRE(calib.scores.size() == 1);
  CHECK(calib.scores.values()[0] == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("identity CDF toy band") {
  std::vector<double> ys;
  for (int i = 0; i < 10; ++i) ys.push_back(0.05 + 0.1 * i);
  const auto model = std::make_shared<UniformModel>();
  const auto calib = calibrate_dist_split(model, targets_at_origin(ys), 0.2);
  // m = 10: lower rank floor(11 * 0.1) = 1, upper rank ceil(11 * 0.9) = 10.
  const auto [t1, t2] = dist_split_cutoffs(calib);
  CHECK(t1 == doctest::Approx(0.05));
  CHECK(t2 == doctest::Approx(0.95));
  const Band b = dist_split_band(calib, std::vector<double>{0.0});
  REQUIRE(b.count() == 1);
  CHECK(b.intervals()[0].lo == doctest::Approx(0.05).epsilon(1e-9));
  CHECK(b.intervals()[0].hi == doctest::Approx(0.95).epsilon(1e-9));
}

TEST_CASE("small alpha with dense scores spans the grid") {
  std::vector<double> ys;
  for (int i = 1; i <= 999; ++i) ys.push_back(i / 1000.0);
  const auto model = std::make_shared<UniformModel>();
  const auto calib = calibrate_dist_split(model, targets_at_origin(ys), 0.001);
  const Band b = dist_split_band(calib, std::vector<double>{0.0});
  CHECK(b.intervals()[0].lo == 0.0);
  CHECK(b.intervals()[0].hi >= 0.999);
}

TEST_CASE("targets below the grid score zero") {
  const auto model = std::make_shared<UniformModel>();
  const auto calib = calibrate_dist_split(model, targets_at_origin({-1.0, -0.5, -3.0}), 0.1);
  for (double s : calib.scores.values()) CHECK(s == 0.0);
}

TEST_CASE("empty calibration set") {
  const auto model = std::make_shared<UniformModel>();
  CHECK_THROWS_AS(calibrate_dist_split(model, Dataset{}, 0.1), InsufficientData);
}

TEST_CASE("oracle CDF scores are uniform") {
  Scenario s;
  s.kind = ScenarioKind::Heteroscedastic;
  const auto model = std::make_shared<OracleDensity>(s, YGrid(-30.0, 30.0, 6001));
  const Dataset calib_data = sample_scenario(s, 2000, 42);
  const auto calib = calibrate_dist_split(model, calib_data, 0.1);
  CHECK(ks_uniform(calib.scores.values()) < 0.05);
}

TEST_CASE("bands are single intervals nested in alpha") {
  Scenario s;
  s.kind = ScenarioKind::Bimodal;
  const auto model = std::make_shared<OracleDensity>(s, scenario_grid(s));
  const Dataset calib_data = sample_scenario(s, 500, 3);
  const Dataset queries = sample_scenario(s, 50, 4);
  std::vector<DistSplitCalibration> calibs;
  for (double alpha : {0.05, 0.1, 0.2, 0.4}) calibs.push_back(calibrate_dist_split(model, calib_data, alpha));
  for (const auto& q : queries) {
    double prev_lo = -1e300;
    double prev_hi = 1e300;
    for (const auto& c : calibs) {
      const Band b = dist_split_band(c, q.features);
      REQUIRE(b.count() == 1);
      CHECK(b.intervals()[0].lo >= prev_lo);
      CHECK(b.intervals()[0].hi <= prev_hi);
      prev_lo = b.intervals()[0].lo;
      prev_hi = b.intervals()[0].hi;
    }
  }
}

TEST_CASE("Monte-Carlo marginal coverage with the k-NN estimator") {
  Scenario s;
  s.kind = ScenarioKind::Heteroscedastic;
  const int reps = 60;
  const std::size_t n_test = 200;
  const std::size_t m = 250;
  std::size_t covered = 0;
  for (int r = 0; r < reps; ++r) {
    const Dataset data = sample_scenario(s, 2 * m, derive_seed(9, r));
    const SplitPair split = split_data(data, 0.5, derive_seed(10, r));
    const auto model = std::make_shared<CdeModel>(fit_cde(split.train));
    const auto calib = calibrate_dist_split(model, split.calibration, 0.1);
    for (const auto& t : sample_scenario(s, n_test, derive_seed(11, r))) {
      covered += band_contains(dist_split_band(calib, t.features), t.target) ? 1 : 0;
    }
  }
  const double total = static_cast<double>(reps) * n_test;
  const double cov = static_cast<double>(covered) / total;
  // Replicate-level calibration noise dominates: var ~ a(1-a)/(m+2) per rep.
  const double se = std::sqrt(0.09 / total + 0.09 / (m + 2) / reps);
  CHECK(cov >= 0.9 - 3 * se);
  CHECK(cov <= 0.9 + 1.0 / (m + 1) + 3 * se);
}

TEST_CASE("degenerate cutoffs fall back to a point band") {
  const auto model = std::make_shared<UniformModel>();
  DistSplitCalibration calib{model, ScoreSet({0.5}), 0.9};
  const Band b = dist_split_band(calib, std::vector<double>{0.0});
  REQUIRE(b.count() == 1);
  CHECK(b.intervals()[0].lo <= b.intervals()[0].hi);
}
