#pragma once

// Conditional estimators shared by all methods. Everything here is built on
// one k-nearest-neighbour search in feature space so that every method sees
// the same notion of locality.

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "cdsplit/core.hpp"

namespace cdsplit {

/// Density values on a YGrid. Values are nonnegative and integrate to one
/// under the trapezoid rule.
struct DensityCurve {
  YGrid grid;
  std::vector<double> values;

  /// Linear interpolation between grid points; zero outside the grid.
  double at(double y) const;
  double max() const;
};

/// Cumulative distribution on a YGrid: nondecreasing, ends at one.
struct CdfCurve {
  YGrid grid;
  std::vector<double> values;

  /// Linear interpolation; 0 below the grid and 1 above it.
  double at(double y) const;
};

/// Rescales `values` in place to unit trapezoid mass on `grid`. An all-zero
/// curve becomes the uniform density over the grid span.
void normalize_density(const YGrid& grid, std::vector<double>& values);

/// Trapezoid integral of `values` over `grid`.
double trapezoid_integral(const YGrid& grid, std::span<const double> values);

CdfCurve cde_cdf(const DensityCurve& density);

/// Smallest y with CDF(y) >= p under linear interpolation of the curve.
/// p <= 0 gives the grid minimum and p >= 1 the grid maximum.
double cdf_inverse(const CdfCurve& cdf, double p);

/// Anything able to produce f(y|x) on a fixed grid: the k-NN kernel
/// estimator below, or an analytic truth injected for oracle checks.
class ConditionalDensity {
 public:
  virtual ~ConditionalDensity() = default;

  virtual const YGrid& grid() const = 0;
  virtual std::size_t dimension() const = 0;
  virtual DensityCurve density(std::span<const double> x) const = 0;
  virtual CdfCurve cdf(std::span<const double> x) const { return cde_cdf(density(x)); }
};

/// Brute-force Euclidean k-NN over a fixed point set. Ties in distance are
/// broken by the lower sample index, so queries are deterministic.
class NeighborIndex {
 public:
  explicit NeighborIndex(std::span<const Sample> data);

  std::size_t size() const { return n_; }
  std::size_t dimension() const { return d_; }
  std::vector<std::size_t> nearest(std::span<const double> x, std::size_t k) const;

 private:
  std::size_t n_ = 0;
  std::size_t d_ = 0;
  std::vector<double> coords_;
};

/// f(y|x) estimate: Gaussian kernels of bandwidth h centred at the targets of
/// the k nearest training points, averaged and renormalised on the grid.
class CdeModel final : public ConditionalDensity {
 public:
  CdeModel(std::span<const Sample> train, std::size_t k, double bandwidth, YGrid grid);

  const YGrid& grid() const override { return grid_; }
  std::size_t dimension() const override { return index_.dimension(); }
  DensityCurve density(std::span<const double> x) const override;

  std::size_t neighbors() const { return k_; }
  double bandwidth() const { return h_; }
  std::size_t train_size() const { return targets_.size(); }

 private:
  NeighborIndex index_;
  std::vector<double> targets_;
  std::size_t k_;
  double h_;
  YGrid grid_;
};

struct CdeOptions {
  std::optional<std::size_t> neighbors;  // default ceil(sqrt(n))
  std::optional<double> bandwidth;       // default: default_bandwidth()
  std::size_t grid_points = 500;
  std::optional<YGrid> grid;             // default: default_grid()
};

std::size_t default_neighbors(std::size_t n);

/// 0.9 * s * k^(-1/5), where s is the average standard deviation of the
/// k-neighbour target sets over (up to 200) evenly spaced training points.
double default_bandwidth(std::span<const Sample> train, std::size_t k);

/// `points` uniform points over [min target - 3h, max target + 3h].
YGrid default_grid(std::span<const Sample> train, double bandwidth, std::size_t points = 500);

CdeModel fit_cde(std::span<const Sample> train, std::size_t k, double bandwidth, const YGrid& grid);
CdeModel fit_cde(std::span<const Sample> train, const CdeOptions& options = {});

DensityCurve cde_density(const ConditionalDensity& model, std::span<const double> x);

// ---------------------------------------------------------------------------
// k-NN point estimators used by the regression baselines.

class RegressionModel {
 public:
  RegressionModel(std::span<const Sample> train, std::size_t k);
  double predict(std::span<const double> x) const;
  std::size_t dimension() const { return index_.dimension(); }

 private:
  friend class MadModel;
  NeighborIndex index_;
  std::vector<double> targets_;
  std::size_t k_;
};

/// Conditional mean absolute deviation: k-NN average of |Y_j - r(x_j)| over
/// the training residuals of a fitted regression, floored at kMadFloor.
class MadModel {
 public:
  static constexpr double kMadFloor = 1e-6;

  MadModel(std::span<const Sample> train, const RegressionModel& regression, std::size_t k);
  double predict(std::span<const double> x) const;

 private:
  NeighborIndex index_;
  std::vector<double> residuals_;
  std::size_t k_;
};

/// Conditional quantiles: order statistic of the k neighbour targets, with
/// the same rank convention as empirical_quantile (p may be 0 or 1).
class QuantileModel {
 public:
  QuantileModel(std::span<const Sample> train, std::size_t k);
  /// ceil((k+1)p)-th smallest neighbour target for p >= 1/2; below 1/2 the
  /// mirrored rank k + 1 - ceil((k+1)(1-p)).
  double predict(std::span<const double> x, double p) const;

 private:
  NeighborIndex index_;
  std::vector<double> targets_;
  std::size_t k_;
};

RegressionModel fit_regression(std::span<const Sample> train, std::size_t k);
double predict_regression(const RegressionModel& model, std::span<const double> x);
MadModel fit_mad(std::span<const Sample> train, const RegressionModel& regression, std::size_t k);
double predict_mad(const MadModel& model, std::span<const double> x);
QuantileModel fit_quantile(std::span<const Sample> train, std::size_t k);
double predict_quantile(const QuantileModel& model, std::span<const double> x, double p);

// ---------------------------------------------------------------------------
// Multinomial logistic classifier.

/// Softmax over per-class affine scores. `coefficients[c]` holds d slopes
/// followed by an intercept.
class ClassifierModel {
 public:
  ClassifierModel(std::vector<std::vector<double>> coefficients, std::size_t dimension);

  int num_classes() const { return static_cast<int>(coefficients_.size()); }
  std::size_t dimension() const { return d_; }
  const std::vector<std::vector<double>>& coefficients() const { return coefficients_; }
  std::vector<double> predict_probs(std::span<const double> x) const;

 private:
  std::vector<std::vector<double>> coefficients_;
  std::size_t d_;
};

struct ClassifierOptions {
  int steps = 2000;
  double learning_rate = 0.1;
};

/// Full-batch gradient descent on the mean multinomial log-loss from zero
/// initialisation. The last class stays pinned at zero for identifiability.
ClassifierModel fit_classifier(std::span<const Sample> train, int num_classes,
                               const ClassifierOptions& options = {});
std::vector<double> predict_probs(const ClassifierModel& model, std::span<const double> x);

}  // namespace cdsplit
