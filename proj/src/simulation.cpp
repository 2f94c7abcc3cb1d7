#include "cdsplit/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include <boost/math/special_functions/gamma.hpp>

#include "cdsplit/cd_split.hpp"

namespace cdsplit {
namespace {

double normal_pdf(double y, double mean, double sd) {
  const double z = (y - mean) / sd;
  return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * std::numbers::pi));
}

double normal_cdf(double y, double mean, double sd) {
  return 0.5 * std::erfc(-(y - mean) / (sd * std::numbers::sqrt2));
}

struct BimodalParams {
  double f;
  double g;
  double sd;
};

BimodalParams bimodal_params(double x1) {
  const double f = (x1 - 1.0) * (x1 - 1.0) * (x1 + 1.0);
  const double g = x1 >= -0.5 ? 2.0 * std::sqrt(x1 + 0.5) : 0.0;
  return {f, g, std::sqrt(0.25 + std::abs(x1))};
}

double hetero_sd(const Scenario& s, double x1) {
  const double v = 1.0 + std::abs(x1);
  return s.normal_variance ? std::sqrt(v) : v;
}

// Gamma noise of the asymmetric scenario: shape and rate.
std::pair<double, double> gamma_params(const Scenario& s, double x1) {
  const double a = 1.0 + 2.0 * std::abs(x1);
  return {a, s.gamma_rate ? a : 1.0 / a};
}

double center_of(const Scenario& s, double x1) {
  switch (s.kind) {
    case ScenarioKind::Bimodal: return bimodal_params(x1).f;
    case ScenarioKind::Asymmetric: return 5.0 * x1;
    default: return x1;
  }
}

}  // namespace

std::string_view to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::Asymmetric: return "asymmetric";
    case ScenarioKind::Bimodal: return "bimodal";
    case ScenarioKind::Heteroscedastic: return "heteroscedastic";
    case ScenarioKind::Homoscedastic: return "homoscedastic";
    case ScenarioKind::LogisticClassification: return "logistic-classification";
  }
  return "unknown";
}

ScenarioKind parse_scenario_kind(std::string_view name) {
  if (name == "asymmetric") return ScenarioKind::Asymmetric;
  if (name == "bimodal") return ScenarioKind::Bimodal;
  if (name == "heteroscedastic") return ScenarioKind::Heteroscedastic;
  if (name == "homoscedastic") return ScenarioKind::Homoscedastic;
  if (name == "logistic-classification" || name == "logistic") {
    return ScenarioKind::LogisticClassification;
  }
  throw ConfigError("unknown scenario '" + std::string(name) + "'");
}

void Scenario::validate() const {
  if (d < 1) throw InvalidArgument("scenario needs at least one covariate");
  if (is_classification() && beta.empty()) throw InvalidArgument("logistic scenario needs beta");
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  return splitmix64(splitmix64(master) ^ splitmix64(stream + 0x632BE59BD9B4E019ULL));
}

Dataset sample_scenario(const Scenario& scenario, std::size_t n, std::uint64_t seed) {
  scenario.validate();
  if (n < 1) throw InvalidArgument("sample_scenario needs n >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> wide(-5.0, 5.0);
  std::uniform_real_distribution<double> narrow(-1.5, 1.5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> stdnorm(0.0, 1.0);

  Dataset out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Sample s;
    s.features.resize(scenario.d);
    for (double& v : s.features) {
      switch (scenario.kind) {
        case ScenarioKind::Bimodal: v = narrow(rng); break;
        case ScenarioKind::LogisticClassification: v = stdnorm(rng); break;
        default: v = wide(rng); break;
      }
    }
    const double x1 = s.features[0];
    switch (scenario.kind) {
      case ScenarioKind::Asymmetric: {
        const auto [shape, rate] = gamma_params(scenario, x1);
        std::gamma_distribution<double> noise(shape, 1.0 / rate);
        s.target = 5.0 * x1 + noise(rng);
        break;
      }
      case ScenarioKind::Bimodal: {
        const auto p = bimodal_params(x1);
        const double side = unit(rng) < 0.5 ? -1.0 : 1.0;
        s.target = p.f + side * p.g + p.sd * stdnorm(rng);
        break;
      }
      case ScenarioKind::Heteroscedastic:
        s.target = x1 + hetero_sd(scenario, x1) * stdnorm(rng);
        break;
      case ScenarioKind::Homoscedastic:
        s.target = x1 + stdnorm(rng);
        break;
      case ScenarioKind::LogisticClassification: {
        const auto probs = true_label_probs(s.features, scenario.beta);
        const double u = unit(rng);
        double acc = 0.0;
        std::size_t label = probs.size() - 1;
        for (std::size_t c = 0; c < probs.size(); ++c) {
          acc += probs[c];
          if (u < acc) {
            label = c;
            break;
          }
        }
        s.target = static_cast<double>(label);
        break;
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

TrueConditional::TrueConditional(const Scenario& scenario, std::span<const double> x)
    : scenario_(scenario), x1_(0.0) {
  scenario_.validate();
  if (x.size() != scenario_.d) throw InvalidArgument("covariate vector has the wrong dimension");
  x1_ = x[0];
  if (scenario_.is_classification()) label_probs_ = true_label_probs(x, scenario_.beta);
}

double TrueConditional::pdf(double y) const {
  switch (scenario_.kind) {
    case ScenarioKind::Asymmetric: {
      const double e = y - 5.0 * x1_;
      if (e < 0.0) return 0.0;
      const auto [shape, rate] = gamma_params(scenario_, x1_);
      if (e == 0.0) return shape == 1.0 ? rate : 0.0;
      return std::exp((shape - 1.0) * std::log(e) - rate * e + shape * std::log(rate) - std::lgamma(shape));
    }
    case ScenarioKind::Bimodal: {
      const auto p = bimodal_params(x1_);
      return 0.5 * normal_pdf(y, p.f - p.g, p.sd) + 0.5 * normal_pdf(y, p.f + p.g, p.sd);
    }
    case ScenarioKind::Heteroscedastic: return normal_pdf(y, x1_, hetero_sd(scenario_, x1_));
    case ScenarioKind::Homoscedastic: return normal_pdf(y, x1_, 1.0);
    case ScenarioKind::LogisticClassification: break;
  }
  throw InvalidArgument("pdf is undefined for the classification scenario");
}

double TrueConditional::cdf(double y) const {
  switch (scenario_.kind) {
    case ScenarioKind::Asymmetric: {
      const double e = y - 5.0 * x1_;
      if (e <= 0.0) return 0.0;
      const auto [shape, rate] = gamma_params(scenario_, x1_);
      return boost::math::gamma_p(shape, rate * e);
    }
    case ScenarioKind::Bimodal: {
      const auto p = bimodal_params(x1_);
      return 0.5 * normal_cdf(y, p.f - p.g, p.sd) + 0.5 * normal_cdf(y, p.f + p.g, p.sd);
    }
    case ScenarioKind::Heteroscedastic: return normal_cdf(y, x1_, hetero_sd(scenario_, x1_));
    case ScenarioKind::Homoscedastic: return normal_cdf(y, x1_, 1.0);
    case ScenarioKind::LogisticClassification: break;
  }
  throw InvalidArgument("cdf is undefined for the classification scenario");
}

double TrueConditional::quantile(double p) const {
  if (!(p > 0.0 && p < 1.0)) throw InvalidArgument("quantile level must lie in (0, 1)");
  const double c = center_of(scenario_, x1_);
  double width = 1.0;
  double lo = c - width;
  double hi = c + width;
  while (cdf(lo) >= p) {
    width *= 2.0;
    lo = c - width;
  }
  while (cdf(hi) < p) {
    width *= 2.0;
    hi = c + width;
  }
  for (int it = 0; it < 200 && hi - lo > 1e-12 * std::max(1.0, std::abs(c)); ++it) {
    const double mid = 0.5 * (lo + hi);
    (cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

DensityCurve TrueConditional::density_curve(const YGrid& grid) const {
  std::vector<double> v(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) v[i] = pdf(grid[i]);
  normalize_density(grid, v);
  return DensityCurve{grid, std::move(v)};
}

CdfCurve TrueConditional::cdf_curve(const YGrid& grid) const {
  std::vector<double> v(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) v[i] = cdf(grid[i]);
  v.back() = 1.0;
  return CdfCurve{grid, std::move(v)};
}

DensityCurve true_density(const Scenario& scenario, std::span<const double> x, const YGrid& grid) {
  return TrueConditional(scenario, x).density_curve(grid);
}

CdfCurve true_cdf(const Scenario& scenario, std::span<const double> x, const YGrid& grid) {
  return TrueConditional(scenario, x).cdf_curve(grid);
}

YGrid scenario_grid(const Scenario& scenario, std::size_t points) {
  switch (scenario.kind) {
    case ScenarioKind::Bimodal: return YGrid(-12.0, 12.0, points);
    case ScenarioKind::Asymmetric: return YGrid(-30.0, 30.0, points);
    case ScenarioKind::Heteroscedastic:
    case ScenarioKind::Homoscedastic: return YGrid(-5.0 * 5.0 - 8.0, 5.0 * 5.0 + 8.0, points);
    case ScenarioKind::LogisticClassification: break;
  }
  throw InvalidArgument("the classification scenario has no target grid");
}

Band oracle_interval(const Scenario& scenario, std::span<const double> x, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("alpha must lie in (0, 1)");
  const TrueConditional truth(scenario, x);
  return Band({{truth.quantile(0.5 * alpha), truth.quantile(1.0 - 0.5 * alpha)}});
}

namespace {

// Integral of the piecewise-linear interpolant of f over {y : f(y) >= t}.
double superlevel_mass(const DensityCurve& density, double t) {
  const auto& f = density.values;
  const double h = density.grid.spacing();
  double mass = 0.0;
  for (std::size_t i = 0; i + 1 < f.size(); ++i) {
    const double a = f[i];
    const double b = f[i + 1];
    const double lo = std::min(a, b);
    const double hi = std::max(a, b);
    if (hi < t) continue;
    if (lo >= t) {
      mass += 0.5 * h * (a + b);
      continue;
    }
    // Partial cell: the part above t has width w and runs from t up to hi.
    const double w = h * (hi - t) / (hi - lo);
    mass += 0.5 * w * (t + hi);
  }
  return mass;
}

}  // namespace

double oracle_hpd_cutoff(const DensityCurve& density, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("alpha must lie in (0, 1)");
  const double target = 1.0 - alpha;
  double lo = 0.0;
  double hi = density.max();
  if (superlevel_mass(density, hi) >= target) return hi;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * density.max(); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (superlevel_mass(density, mid) >= target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

Band oracle_hpd_band(const Scenario& scenario, std::span<const double> x, double alpha,
                     const YGrid& grid) {
  const DensityCurve density = true_density(scenario, x, grid);
  return threshold_band(density, oracle_hpd_cutoff(density, alpha));
}

std::vector<double> true_label_probs(std::span<const double> x, std::span<const double> beta) {
  if (x.empty()) throw InvalidArgument("true_label_probs needs at least one covariate");
  if (beta.empty()) throw InvalidArgument("true_label_probs needs beta");
  std::vector<double> logits(beta.size());
  for (std::size_t i = 0; i < beta.size(); ++i) logits[i] = beta[i] * x[0];
  const double top = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double& z : logits) {
    z = std::exp(z - top);
    total += z;
  }
  for (double& z : logits) z /= total;
  return logits;
}

OracleDensity::OracleDensity(Scenario scenario, YGrid grid)
    : scenario_(std::move(scenario)), grid_(grid) {
  scenario_.validate();
  if (scenario_.is_classification()) throw InvalidArgument("oracle density needs a regression scenario");
}

DensityCurve OracleDensity::density(std::span<const double> x) const {
  return TrueConditional(scenario_, x).density_curve(grid_);
}

CdfCurve OracleDensity::cdf(std::span<const double> x) const {
  return TrueConditional(scenario_, x).cdf_curve(grid_);
}

}  // namespace cdsplit
