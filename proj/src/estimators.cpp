#include "cdsplit/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cdsplit {
namespace {

constexpr double kKernelReach = 6.0;  // kernel truncated beyond 6 bandwidths

void check_query(std::span<const double> x, std::size_t d) {
  if (x.size() != d) {
    throw InvalidArgument("query has " + std::to_string(x.size()) + " features, expected " +
                          std::to_string(d));
  }
}

void check_fit(std::span<const Sample> train, std::size_t k) {
  if (train.empty()) throw InvalidArgument("cannot fit on an empty training set");
  if (k < 1 || k > train.size()) throw InvalidArgument("neighbour count must lie in [1, n]");
  check_dimension(train, train.front().dimension());
}

std::vector<double> targets_of(std::span<const Sample> data) {
  std::vector<double> out;
  out.reserve(data.size());
  for (const auto& s : data) out.push_back(s.target);
  return out;
}

double sample_sd(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double a : v) ss += (a - mean) * (a - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

double DensityCurve::at(double y) const {
  if (!(y >= grid.lo() && y <= grid.hi())) return 0.0;
  const auto [i, frac] = grid.locate(y);
  return values[i] + frac * (values[i + 1] - values[i]);
}

double DensityCurve::max() const { return *std::max_element(values.begin(), values.end()); }

double CdfCurve::at(double y) const {
  if (y <= grid.lo()) return y < grid.lo() ? 0.0 : values.front();
  if (y >= grid.hi()) return 1.0;
  const auto [i, frac] = grid.locate(y);
  return values[i] + frac * (values[i + 1] - values[i]);
}

double trapezoid_integral(const YGrid& grid, std::span<const double> values) {
  double total = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) total += grid.weight(i) * values[i];
  return total;
}

void normalize_density(const YGrid& grid, std::vector<double>& values) {
  const double mass = trapezoid_integral(grid, values);
  if (!(mass > 0.0) || !std::isfinite(mass)) {
    std::fill(values.begin(), values.end(), 1.0 / (grid.hi() - grid.lo()));
    return;
  }
  for (double& v : values) v /= mass;
}

CdfCurve cde_cdf(const DensityCurve& density) {
  const auto& g = density.grid;
  const auto& f = density.values;
  std::vector<double> c(f.size(), 0.0);
  for (std::size_t i = 1; i < f.size(); ++i) {
    c[i] = c[i - 1] + 0.5 * g.spacing() * (std::max(f[i - 1], 0.0) + std::max(f[i], 0.0));
  }
  const double total = c.back();
  if (total > 0.0) {
    for (double& v : c) v = std::min(v / total, 1.0);
  } else {
    for (std::size_t i = 0; i < c.size(); ++i) {
      c[i] = static_cast<double>(i) / static_cast<double>(c.size() - 1);
    }
  }
  c.back() = 1.0;
  return CdfCurve{g, std::move(c)};
}

double cdf_inverse(const CdfCurve& cdf, double p) {
  const auto& v = cdf.values;
  if (p <= 0.0 || p <= v.front()) return cdf.grid.lo();
  if (p >= 1.0) return cdf.grid.hi();
  const auto it = std::lower_bound(v.begin(), v.end(), p);
  if (it == v.end()) return cdf.grid.hi();
  const auto i = static_cast<std::size_t>(it - v.begin());
  const double lo = v[i - 1];
  const double hi = v[i];
  const double frac = hi > lo ? (p - lo) / (hi - lo) : 1.0;
  return cdf.grid[i - 1] + frac * cdf.grid.spacing();
}

NeighborIndex::NeighborIndex(std::span<const Sample> data)
    : n_(data.size()), d_(data.empty() ? 0 : data.front().dimension()) {
  check_dimension(data, d_);
  coords_.reserve(n_ * d_);
  for (const auto& s : data) coords_.insert(coords_.end(), s.features.begin(), s.features.end());
}

std::vector<std::size_t> NeighborIndex::nearest(std::span<const double> x, std::size_t k) const {
  check_query(x, d_);
  k = std::min(k, n_);
  std::vector<std::pair<double, std::size_t>> dist(n_);
  for (std::size_t i = 0; i < n_; ++i) {
    double s = 0.0;
    const double* p = coords_.data() + i * d_;
    for (std::size_t j = 0; j < d_; ++j) {
      const double diff = p[j] - x[j];
      s += diff * diff;
    }
    dist[i] = {s, i};
  }
  if (k < n_) {
    std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
  }
  dist.resize(k);
  std::sort(dist.begin(), dist.end());
  std::vector<std::size_t> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = dist[i].second;
  return out;
}

CdeModel::CdeModel(std::span<const Sample> train, std::size_t k, double bandwidth, YGrid grid)
    : index_((check_fit(train, k), train)), targets_(targets_of(train)), k_(k), h_(bandwidth),
      grid_(grid) {
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
    throw InvalidArgument("kernel bandwidth must be positive");
  }
}

DensityCurve CdeModel::density(std::span<const double> x) const {
  const auto nbrs = index_.nearest(x, k_);
  std::vector<double> values(grid_.size(), 0.0);
  const double inv_h = 1.0 / h_;
  const double last = static_cast<double>(grid_.size() - 1);
  for (std::size_t j : nbrs) {
    const double t = targets_[j];
    const double from = std::ceil((t - kKernelReach * h_ - grid_.lo()) / grid_.spacing());
    const double to = std::floor((t + kKernelReach * h_ - grid_.lo()) / grid_.spacing());
    if (to < 0.0 || from > last) continue;
    const auto i0 = static_cast<std::size_t>(std::max(from, 0.0));
    const auto i1 = static_cast<std::size_t>(std::min(to, last));
    for (std::size_t i = i0; i <= i1; ++i) {
      const double z = (grid_[i] - t) * inv_h;
      values[i] += std::exp(-0.5 * z * z);
    }
  }
  normalize_density(grid_, values);
  return DensityCurve{grid_, std::move(values)};
}

std::size_t default_neighbors(std::size_t n) {
  const auto k = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
  return std::clamp<std::size_t>(k, 1, std::max<std::size_t>(n, 1));
}

double default_bandwidth(std::span<const Sample> train, std::size_t k) {
  check_fit(train, k);
  const NeighborIndex index(train);
  const std::size_t probes = std::min<std::size_t>(train.size(), 200);
  double sd_sum = 0.0;
  std::vector<double> local;
  for (std::size_t p = 0; p < probes; ++p) {
    const std::size_t i = p * train.size() / probes;
    local.clear();
    for (std::size_t j : index.nearest(train[i].features, k)) local.push_back(train[j].target);
    sd_sum += sample_sd(local);
  }
  double s = sd_sum / static_cast<double>(probes);
  if (!(s > 0.0)) s = sample_sd(targets_of(train));
  if (!(s > 0.0)) s = 1e-3;
  return 0.9 * s * std::pow(static_cast<double>(k), -0.2);
}

YGrid default_grid(std::span<const Sample> train, double bandwidth, std::size_t points) {
  if (train.empty()) throw InvalidArgument("cannot build a grid from an empty training set");
  const auto [lo, hi] = std::minmax_element(
      train.begin(), train.end(),
      [](const Sample& a, const Sample& b) { return a.target < b.target; });
  return YGrid(lo->target - 3.0 * bandwidth, hi->target + 3.0 * bandwidth, points);
}

CdeModel fit_cde(std::span<const Sample> train, std::size_t k, double bandwidth, const YGrid& grid) {
  return CdeModel(train, k, bandwidth, grid);
}

CdeModel fit_cde(std::span<const Sample> train, const CdeOptions& options) {
  if (train.empty()) throw InvalidArgument("cannot fit on an empty training set");
  const std::size_t k = options.neighbors.value_or(default_neighbors(train.size()));
  const double h = options.bandwidth ? *options.bandwidth : default_bandwidth(train, k);
  const YGrid grid = options.grid ? *options.grid : default_grid(train, h, options.grid_points);
  return CdeModel(train, k, h, grid);
}

DensityCurve cde_density(const ConditionalDensity& model, std::span<const double> x) {
  check_query(x, model.dimension());
  return model.density(x);
}

RegressionModel::RegressionModel(std::span<const Sample> train, std::size_t k)
    : index_((check_fit(train, k), train)), targets_(targets_of(train)), k_(k) {}

double RegressionModel::predict(std::span<const double> x) const {
  const auto nbrs = index_.nearest(x, k_);
  double s = 0.0;
  for (std::size_t j : nbrs) s += targets_[j];
  return s / static_cast<double>(nbrs.size());
}

MadModel::MadModel(std::span<const Sample> train, const RegressionModel& regression, std::size_t k)
    : index_((check_fit(train, k), train)), k_(k) {
  if (regression.dimension() != index_.dimension()) {
    throw InvalidArgument("regression model dimension does not match training data");
  }
  residuals_.reserve(train.size());
  for (const auto& s : train) residuals_.push_back(std::abs(s.target - regression.predict(s.features)));
}

double MadModel::predict(std::span<const double> x) const {
  const auto nbrs = index_.nearest(x, k_);
  double s = 0.0;
  for (std::size_t j : nbrs) s += residuals_[j];
  return std::max(s / static_cast<double>(nbrs.size()), kMadFloor);
}

QuantileModel::QuantileModel(std::span<const Sample> train, std::size_t k)
    : index_((check_fit(train, k), train)), targets_(targets_of(train)), k_(k) {}

double QuantileModel::predict(std::span<const double> x, double p) const {
  const auto nbrs = index_.nearest(x, k_);
  std::vector<double> local;
  local.reserve(nbrs.size());
  for (std::size_t j : nbrs) local.push_back(targets_[j]);
  // Lower levels mirror the upper rank so alpha/2 and 1 - alpha/2 sit
  // symmetrically inside the neighbour sample.
  const double level = std::clamp(p, 0.0, 1.0);
  const std::size_t m = local.size();
  const std::size_t r = level >= 0.5 ? upper_rank(m, level) : std::max<std::size_t>(1, m + 1 - upper_rank(m, 1.0 - level));
  std::nth_element(local.begin(), local.begin() + static_cast<std::ptrdiff_t>(r - 1), local.end());
  return local[r - 1];
}

RegressionModel fit_regression(std::span<const Sample> train, std::size_t k) {
  return RegressionModel(train, k);
}
double predict_regression(const RegressionModel& model, std::span<const double> x) {
  return model.predict(x);
}
MadModel fit_mad(std::span<const Sample> train, const RegressionModel& regression, std::size_t k) {
  return MadModel(train, regression, k);
}
double predict_mad(const MadModel& model, std::span<const double> x) { return model.predict(x); }
QuantileModel fit_quantile(std::span<const Sample> train, std::size_t k) {
  return QuantileModel(train, k);
}
double predict_quantile(const QuantileModel& model, std::span<const double> x, double p) {
  return model.predict(x, p);
}

ClassifierModel::ClassifierModel(std::vector<std::vector<double>> coefficients, std::size_t dimension)
    : coefficients_(std::move(coefficients)), d_(dimension) {
  if (coefficients_.empty()) throw InvalidArgument("classifier needs at least one class");
  for (const auto& c : coefficients_) {
    if (c.size() != d_ + 1) throw InvalidArgument("coefficient vector must hold d slopes and an intercept");
  }
}

std::vector<double> ClassifierModel::predict_probs(std::span<const double> x) const {
  check_query(x, d_);
  std::vector<double> logits(coefficients_.size());
  for (std::size_t c = 0; c < coefficients_.size(); ++c) {
    const auto& w = coefficients_[c];
    double z = w[d_];
    for (std::size_t j = 0; j < d_; ++j) z += w[j] * x[j];
    logits[c] = z;
  }
  const double top = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double& z : logits) {
    z = std::exp(z - top);
    total += z;
  }
  for (double& z : logits) z /= total;
  return logits;
}

ClassifierModel fit_classifier(std::span<const Sample> train, int num_classes,
                               const ClassifierOptions& options) {
  if (train.empty()) throw InvalidArgument("cannot fit a classifier on an empty training set");
  if (num_classes < 1) throw InvalidArgument("classifier needs at least one class");
  if (options.steps < 0 || !(options.learning_rate > 0.0)) {
    throw InvalidArgument("classifier needs nonnegative steps and a positive learning rate");
  }
  const std::size_t d = train.front().dimension();
  check_dimension(train, d);
  for (const auto& s : train) {
    if (s.label() < 0 || s.label() >= num_classes || s.target != static_cast<double>(s.label())) {
      throw InvalidArgument("classification targets must be labels in {0..K-1}");
    }
  }
  const auto K = static_cast<std::size_t>(num_classes);
  std::vector<std::vector<double>> w(K, std::vector<double>(d + 1, 0.0));
  std::vector<std::vector<double>> grad(K, std::vector<double>(d + 1, 0.0));
  const double inv_n = 1.0 / static_cast<double>(train.size());

  for (int step = 0; step < options.steps; ++step) {
    ClassifierModel current(w, d);
    for (auto& g : grad) std::fill(g.begin(), g.end(), 0.0);
    for (const auto& s : train) {
      const auto p = current.predict_probs(s.features);
      for (std::size_t c = 0; c + 1 < K; ++c) {
        const double r = p[c] - (static_cast<std::size_t>(s.label()) == c ? 1.0 : 0.0);
        for (std::size_t j = 0; j < d; ++j) grad[c][j] += r * s.features[j];
        grad[c][d] += r;
      }
    }
    for (std::size_t c = 0; c + 1 < K; ++c) {
      for (std::size_t j = 0; j <= d; ++j) w[c][j] -= options.learning_rate * grad[c][j] * inv_n;
    }
  }
  return ClassifierModel(std::move(w), d);
}

std::vector<double> predict_probs(const ClassifierModel& model, std::span<const double> x) {
  return model.predict_probs(x);
}

}  // namespace cdsplit
