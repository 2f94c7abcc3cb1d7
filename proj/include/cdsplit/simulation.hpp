#pragma once

// Synthetic benchmark scenarios with known conditional laws.
//
//   asymmetric       X_j ~ U(-5, 5),     Y = 5 x_1 + e, e ~ Gamma(a, a), a = 1 + 2|x_1|
//   bimodal          X_j ~ U(-1.5, 1.5), Y ~ 0.5 N(f - g, s2) + 0.5 N(f + g, s2)
//                    f = (x_1 - 1)^2 (x_1 + 1), g = 2 I(x_1 >= -0.5) sqrt(x_1 + 0.5),
//                    s2 = 1/4 + |x_1|
//   heteroscedastic  X_j ~ U(-5, 5),     Y ~ N(x_1, 1 + |x_1|)
//   homoscedastic    X_j ~ U(-5, 5),     Y ~ N(x_1, 1)
//   logistic         X_j ~ N(0, 1),      P(Y = i | x) proportional to exp(beta_i x_1)
//
// Gamma(a, b) is read as shape a and rate b (mean a/b = 1), and the second
// argument of N(m, v) as a variance. Both readings can be flipped through
// the Scenario flags; the bimodal s2 is a variance either way.

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cdsplit/core.hpp"
#include "cdsplit/estimators.hpp"

namespace cdsplit {

enum class ScenarioKind { Asymmetric, Bimodal, Heteroscedastic, Homoscedastic, LogisticClassification };

std::string_view to_string(ScenarioKind kind);
/// Accepts asymmetric | bimodal | heteroscedastic | homoscedastic |
/// logistic-classification (alias: logistic). Throws ConfigError.
ScenarioKind parse_scenario_kind(std::string_view name);

struct Scenario {
  ScenarioKind kind = ScenarioKind::Homoscedastic;
  std::size_t d = 1;
  bool normal_variance = true;  // N(m, v): v is a variance (false: a standard deviation)
  bool gamma_rate = true;       // Gamma(a, b): b is a rate (false: a scale)
  std::vector<double> beta = {-6.0, -5.0, -1.5, 0.0, 1.5, 5.0, 6.0};

  bool is_classification() const { return kind == ScenarioKind::LogisticClassification; }
  int num_classes() const { return is_classification() ? static_cast<int>(beta.size()) : 0; }
  /// Throws InvalidArgument on d = 0 or an empty beta for classification.
  void validate() const;
};

/// splitmix64 finaliser.
std::uint64_t splitmix64(std::uint64_t x);
/// Independent seed for sub-stream `stream` of `master`.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

/// n i.i.d. draws; deterministic per seed.
Dataset sample_scenario(const Scenario& scenario, std::size_t n, std::uint64_t seed);

/// Law of Y given x under a regression scenario, or the label law under the
/// classification scenario.
class TrueConditional {
 public:
  TrueConditional(const Scenario& scenario, std::span<const double> x);

  bool is_classification() const { return scenario_.is_classification(); }
  double pdf(double y) const;
  double cdf(double y) const;
  /// Inverse CDF by bisection to ~1e-12.
  double quantile(double p) const;
  const std::vector<double>& label_probs() const { return label_probs_; }

  /// Analytic density on the grid, renormalised to unit trapezoid mass.
  DensityCurve density_curve(const YGrid& grid) const;
  /// Analytic CDF on the grid (last point forced to 1).
  CdfCurve cdf_curve(const YGrid& grid) const;

 private:
  Scenario scenario_;
  double x1_;
  std::vector<double> label_probs_;
};

DensityCurve true_density(const Scenario& scenario, std::span<const double> x, const YGrid& grid);
CdfCurve true_cdf(const Scenario& scenario, std::span<const double> x, const YGrid& grid);

/// Default target grid for oracle work: [-33, 33] for the normal scenarios,
/// [-12, 12] bimodal, [-30, 30] asymmetric.
YGrid scenario_grid(const Scenario& scenario, std::size_t points = 1000);

/// [F^-1(alpha/2 | x), F^-1(1 - alpha/2 | x)]
Band oracle_interval(const Scenario& scenario, std::span<const double> x, double alpha);

/// Level t of the highest-density region: the largest t (by bisection) such
/// that the linearly interpolated density has mass >= 1 - alpha on {f >= t}.
double oracle_hpd_cutoff(const DensityCurve& density, double alpha);
Band oracle_hpd_band(const Scenario& scenario, std::span<const double> x, double alpha,
                     const YGrid& grid);

/// softmax(beta_i * x_1)
std::vector<double> true_label_probs(std::span<const double> x, std::span<const double> beta);

/// The true conditional density injected as an estimator.
class OracleDensity final : public ConditionalDensity {
 public:
  OracleDensity(Scenario scenario, YGrid grid);

  const YGrid& grid() const override { return grid_; }
  std::size_t dimension() const override { return scenario_.d; }
  DensityCurve density(std::span<const double> x) const override;
  CdfCurve cdf(std::span<const double> x) const override;

 private:
  Scenario scenario_;
  YGrid grid_;
};

}  // namespace cdsplit
