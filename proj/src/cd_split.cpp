#include "cdsplit/cd_split.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <string>

#include "cdsplit/log.hpp"

namespace cdsplit {
namespace {

struct Assignment {
  std::vector<std::size_t> cells;
  double cost = 0.0;
};

std::pair<std::size_t, double> nearest_centroid(const std::vector<std::vector<double>>& centroids,
                                                std::span<const double> point,
                                                std::span<const double> weights) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < centroids.size(); ++j) {
    const double d = weighted_sq_distance(point, centroids[j], weights);
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  return {best, best_d};
}

Assignment assign_all(const std::vector<std::vector<double>>& centroids,
                      std::span<const std::vector<double>> points, std::span<const double> weights) {
  Assignment out;
  out.cells.resize(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto [cell, d] = nearest_centroid(centroids, points[i], weights);
    out.cells[i] = cell;
    out.cost += d;
  }
  return out;
}

std::vector<ScoreSet> split_scores(const std::vector<double>& scores,
                                   const std::vector<std::size_t>& cells, std::size_t num_cells) {
  std::vector<std::vector<double>> grouped(num_cells);
  for (std::size_t i = 0; i < scores.size(); ++i) grouped[cells[i]].push_back(scores[i]);
  std::vector<ScoreSet> out;
  out.reserve(num_cells);
  for (std::size_t j = 0; j < num_cells; ++j) {
    if (grouped[j].empty()) {
      log_info("partition element " + std::to_string(j) +
               " holds no calibration points; queries there use the pooled scores");
    }
    out.emplace_back(std::move(grouped[j]));
  }
  return out;
}

const ScoreSet& element_or_pooled(const std::vector<ScoreSet>& elements, const ScoreSet& pooled,
                                  std::size_t element) {
  return elements[element].empty() ? pooled : elements[element];
}

}  // namespace

TGrid::TGrid(std::vector<double> cutoffs) : cutoffs_(std::move(cutoffs)) {
  if (cutoffs_.size() < 2) throw InvalidArgument("t-grid needs at least two cutoffs");
  if (cutoffs_.front() != 0.0) throw InvalidArgument("t-grid must start at 0");
  for (std::size_t b = 1; b < cutoffs_.size(); ++b) {
    if (!(cutoffs_[b] > cutoffs_[b - 1]) || !std::isfinite(cutoffs_[b])) {
      throw InvalidArgument("t-grid cutoffs must be finite and strictly increasing");
    }
  }
  weights_.assign(cutoffs_.size(), 0.0);
  for (std::size_t b = 1; b < cutoffs_.size(); ++b) {
    const double half = 0.5 * (cutoffs_[b] - cutoffs_[b - 1]);
    weights_[b - 1] += half;
    weights_[b] += half;
  }
}

TGrid TGrid::uniform(double max_level, std::size_t count) {
  if (!(max_level > 0.0) || !std::isfinite(max_level)) {
    throw InvalidArgument("t-grid upper level must be positive");
  }
  if (count < 2) throw InvalidArgument("t-grid needs at least two cutoffs");
  std::vector<double> c(count);
  for (std::size_t b = 0; b < count; ++b) {
    c[b] = max_level * static_cast<double>(b) / static_cast<double>(count - 1);
  }
  return TGrid(std::move(c));
}

ProfileVector profile(const DensityCurve& density, std::shared_ptr<const TGrid> tgrid) {
  if (!tgrid) throw InvalidArgument("profile needs a t-grid");
  const auto& f = density.values;
  const std::size_t G = f.size();
  std::vector<std::size_t> order(G);
  for (std::size_t i = 0; i < G; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return f[a] < f[b]; });

  // above[i] = mass of the grid points ranked i and higher (ascending order).
  std::vector<double> sorted(G);
  std::vector<double> above(G + 1, 0.0);
  for (std::size_t r = G; r-- > 0;) {
    sorted[r] = f[order[r]];
    above[r] = above[r + 1] + density.grid.weight(order[r]) * f[order[r]];
  }
  ProfileVector out{tgrid, std::vector<double>(tgrid->size())};
  for (std::size_t b = 0; b < tgrid->size(); ++b) {
    const double t = tgrid->cutoffs()[b];
    const auto r = static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), t) - sorted.begin());
    out.values[b] = std::clamp(above[r], 0.0, 1.0);
  }
  return out;
}

double profile_distance(const ProfileVector& a, const ProfileVector& b) {
  if (!a.tgrid || !b.tgrid || (a.tgrid != b.tgrid && !(*a.tgrid == *b.tgrid))) {
    throw InvalidArgument("profiles live on different t-grids");
  }
  return std::sqrt(weighted_sq_distance(a.values, b.values, a.tgrid->weights()));
}

double weighted_sq_distance(std::span<const double> a, std::span<const double> b,
                            std::span<const double> weights) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += weights[i] * d * d;
  }
  return s;
}

std::size_t count_distinct(std::span<const std::vector<double>> points) {
  std::vector<const std::vector<double>*> ptrs;
  ptrs.reserve(points.size());
  for (const auto& p : points) ptrs.push_back(&p);
  std::sort(ptrs.begin(), ptrs.end(), [](auto* a, auto* b) { return *a < *b; });
  const auto last = std::unique(ptrs.begin(), ptrs.end(), [](auto* a, auto* b) { return *a == *b; });
  return static_cast<std::size_t>(last - ptrs.begin());
}

Partition build_partition(std::span<const std::vector<double>> points, std::span<const double> weights,
                          std::size_t num_cells, std::uint64_t seed) {
  if (num_cells < 1) throw InvalidArgument("partition needs at least one cell");
  if (points.empty()) throw InvalidArgument("partition needs at least one point");
  for (const auto& p : points) {
    if (p.size() != weights.size()) throw InvalidArgument("point and weight dimensions differ");
  }
  if (num_cells > count_distinct(points)) {
    throw InvalidArgument("number of cells exceeds the number of distinct points");
  }
  const std::size_t n = points.size();
  const std::size_t dim = weights.size();
  std::mt19937_64 rng(seed);

  // k-means++ seeding.
  std::vector<std::vector<double>> centroids;
  centroids.reserve(num_cells);
  centroids.push_back(points[std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)]);
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = weighted_sq_distance(points[i], centroids[0], weights);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  while (centroids.size() < num_cells) {
    double total = 0.0;
    for (double v : d2) total += v;
    const double target = unit(rng) * total;
    std::size_t pick = n;
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (d2[i] <= 0.0) continue;
      acc += d2[i];
      pick = i;
      if (acc >= target) break;
    }
    centroids.push_back(points[pick]);
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], weighted_sq_distance(points[i], centroids.back(), weights));
    }
  }

  Partition out;
  out.weights.assign(weights.begin(), weights.end());
  Assignment current = assign_all(centroids, points, weights);
  out.objective_trace.push_back(current.cost);

  // Lloyd iterations; an emptied cell keeps its previous centroid.
  std::size_t iter = 0;
  while (iter < kMaxLloydIterations) {
    ++iter;
    std::vector<std::vector<double>> sums(num_cells, std::vector<double>(dim, 0.0));
    std::vector<std::size_t> counts(num_cells, 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto& s = sums[current.cells[i]];
      for (std::size_t c = 0; c < dim; ++c) s[c] += points[i][c];
      ++counts[current.cells[i]];
    }
    for (std::size_t j = 0; j < num_cells; ++j) {
      if (counts[j] == 0) continue;
      for (std::size_t c = 0; c < dim; ++c) centroids[j][c] = sums[j][c] / static_cast<double>(counts[j]);
    }
    Assignment next = assign_all(centroids, points, weights);
    out.objective_trace.push_back(next.cost);
    const bool stable = next.cells == current.cells;
    current = std::move(next);
    if (stable) break;
  }
  out.iterations = iter;
  out.centroids = std::move(centroids);
  out.assignments = std::move(current.cells);
  return out;
}

Partition build_partition(std::span<const ProfileVector> profiles, std::size_t num_cells,
                          std::uint64_t seed) {
  if (profiles.empty()) throw InvalidArgument("partition needs at least one profile");
  std::vector<std::vector<double>> points;
  points.reserve(profiles.size());
  for (const auto& p : profiles) {
    if (p.tgrid != profiles.front().tgrid && !(*p.tgrid == *profiles.front().tgrid)) {
      throw InvalidArgument("profiles live on different t-grids");
    }
    points.push_back(p.values);
  }
  return build_partition(points, profiles.front().tgrid->weights(), num_cells, seed);
}

std::size_t assign_partition(const Partition& partition, std::span<const double> point) {
  if (point.size() != partition.weights.size()) {
    throw InvalidArgument("point dimension does not match the partition");
  }
  return nearest_centroid(partition.centroids, point, partition.weights).first;
}

std::size_t assign_partition(const Partition& partition, const ProfileVector& profile) {
  return assign_partition(partition, std::span<const double>(profile.values));
}

Band threshold_band(const DensityCurve& density, double t) {
  const auto& f = density.values;
  const auto& g = density.grid;
  const std::size_t G = f.size();
  std::vector<Interval> runs;
  std::size_t i = 0;
  while (i < G) {
    if (!(f[i] >= t)) {
      ++i;
      continue;
    }
    const std::size_t start = i;
    while (i + 1 < G && f[i + 1] >= t) ++i;
    const std::size_t stop = i;
    double lo = g[start];
    double hi = g[stop];
    if (start > 0 && f[start] > f[start - 1]) {
      lo = g[start - 1] + g.spacing() * (t - f[start - 1]) / (f[start] - f[start - 1]);
    }
    if (stop + 1 < G && f[stop] > f[stop + 1]) {
      hi = g[stop] + g.spacing() * (f[stop] - t) / (f[stop] - f[stop + 1]);
    }
    runs.push_back({lo, hi});
    ++i;
  }
  return Band::merged(std::move(runs), 1.5 * g.spacing());
}

std::size_t default_num_cells(std::size_t calibration_size) {
  return std::max<std::size_t>(1, (calibration_size + 99) / 100);
}

CdSplitCalibration calibrate_cd_split(std::shared_ptr<const ConditionalDensity> model,
                                      std::span<const Sample> calibration, std::size_t num_cells,
                                      double alpha, std::optional<TGrid> tgrid, std::uint64_t seed) {
  if (!model) throw InvalidArgument("cd-split needs a conditional density model");
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("alpha must lie in (0, 1)");
  if (num_cells < 1) throw InvalidArgument("cd-split needs at least one partition element");
  if (calibration.empty()) throw InsufficientData("cd-split calibration set is empty");
  check_dimension(calibration, model->dimension());

  std::vector<DensityCurve> densities;
  densities.reserve(calibration.size());
  std::vector<double> scores;
  scores.reserve(calibration.size());
  double top = 0.0;
  for (const auto& s : calibration) {
    densities.push_back(model->density(s.features));
    scores.push_back(densities.back().at(s.target));
    top = std::max(top, densities.back().max());
  }

  auto grid = std::make_shared<const TGrid>(tgrid ? std::move(*tgrid) : TGrid::uniform(top));
  std::vector<std::vector<double>> points;
  points.reserve(densities.size());
  for (const auto& d : densities) points.push_back(profile(d, grid).values);

  const std::size_t distinct = count_distinct(points);
  if (num_cells > distinct) {
    log_info("cd-split: reducing J from " + std::to_string(num_cells) + " to " +
             std::to_string(distinct) + " distinct profiles");
    num_cells = distinct;
  }
  Partition partition = build_partition(points, grid->weights(), num_cells, seed);
  auto elements = split_scores(scores, partition.assignments, partition.size());
  return CdSplitCalibration{std::move(model), std::move(grid), std::move(partition),
                            std::move(elements), ScoreSet(std::move(scores)), alpha};
}

CdSplitQuery cd_split_query(const CdSplitCalibration& calib, std::span<const double> x) {
  DensityCurve density = cde_density(*calib.model, x);
  const std::size_t element = assign_partition(calib.partition, profile(density, calib.tgrid));
  const double cutoff = lower_empirical_quantile(
      element_or_pooled(calib.element_scores, calib.pooled_scores, element), calib.alpha);
  return CdSplitQuery{std::move(density), element, cutoff};
}

Band cd_split_band(const CdSplitCalibration& calib, std::span<const double> x) {
  const CdSplitQuery q = cd_split_query(calib, x);
  return threshold_band(q.density, q.cutoff);
}

LabelSet threshold_labels(std::span<const double> probs, double cutoff) {
  std::vector<int> labels;
  for (std::size_t c = 0; c < probs.size(); ++c) {
    if (probs[c] >= cutoff) labels.push_back(static_cast<int>(c));
  }
  return LabelSet(std::move(labels), static_cast<int>(probs.size()));
}

CdSplitClassCalibration calibrate_cd_split_classifier(std::shared_ptr<const ClassifierModel> classifier,
                                                      std::span<const Sample> calibration,
                                                      std::size_t num_cells, double alpha,
                                                      std::uint64_t seed) {
  if (!classifier) throw InvalidArgument("cd-split needs a classifier");
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("alpha must lie in (0, 1)");
  if (num_cells < 1) throw InvalidArgument("cd-split needs at least one partition element");
  if (calibration.empty()) throw InsufficientData("cd-split calibration set is empty");
  check_dimension(calibration, classifier->dimension());

  std::vector<std::vector<double>> points;
  std::vector<double> scores;
  points.reserve(calibration.size());
  scores.reserve(calibration.size());
  for (const auto& s : calibration) {
    if (s.label() < 0 || s.label() >= classifier->num_classes()) {
      throw InvalidArgument("calibration label outside {0..K-1}");
    }
    points.push_back(classifier->predict_probs(s.features));
    scores.push_back(points.back()[static_cast<std::size_t>(s.label())]);
  }
  const std::size_t distinct = count_distinct(points);
  num_cells = std::min(num_cells, distinct);
  const std::vector<double> weights(static_cast<std::size_t>(classifier->num_classes()), 1.0);
  Partition partition = build_partition(points, weights, num_cells, seed);
  auto elements = split_scores(scores, partition.assignments, partition.size());
  return CdSplitClassCalibration{std::move(classifier), std::move(partition), std::move(elements),
                                 ScoreSet(std::move(scores)), alpha};
}

LabelSet cd_split_labelset(const CdSplitClassCalibration& calib, std::span<const double> x) {
  const auto probs = calib.classifier->predict_probs(x);
  const std::size_t element = assign_partition(calib.partition, probs);
  const double cutoff = lower_empirical_quantile(
      element_or_pooled(calib.element_scores, calib.pooled_scores, element), calib.alpha);
  return threshold_labels(probs, cutoff);
}

LabelSet cd_split_labelset(std::shared_ptr<const ClassifierModel> classifier,
                           std::span<const Sample> calibration, std::size_t num_cells, double alpha,
                           std::span<const double> x, std::uint64_t seed) {
  return cd_split_labelset(
      calibrate_cd_split_classifier(std::move(classifier), calibration, num_cells, alpha, seed), x);
}

void write_partition_diagnostic(std::ostream& out, std::span<const Sample> calibration,
                                std::span<const std::size_t> assignments) {
  if (calibration.size() != assignments.size()) {
    throw InvalidArgument("one partition assignment per calibration point is required");
  }
  const std::size_t d = calibration.empty() ? 0 : calibration.front().dimension();
  for (std::size_t j = 0; j < d; ++j) out << "x_" << (j + 1) << ',';
  out << "y,element\n";
  const auto old_precision = out.precision(17);
  for (std::size_t i = 0; i < calibration.size(); ++i) {
    for (double v : calibration[i].features) out << v << ',';
    out << calibration[i].target << ',' << assignments[i] << '\n';
  }
  out.precision(old_precision);
}

}  // namespace cdsplit
