#pragma once

// CD-split: conformalised conditional density bands calibrated locally on a
// partition of feature space. Points are grouped by the profile of their
// estimated density, g_x(t) = mass of f(.|x) above level t, so that points
// far apart in x but with the same density shape share calibration scores.

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "cdsplit/core.hpp"
#include "cdsplit/estimators.hpp"

namespace cdsplit {

/// Density levels at which profiles are evaluated: 0 = t_0 < t_1 < ...
class TGrid {
 public:
  explicit TGrid(std::vector<double> cutoffs);
  /// `count` uniform cutoffs on [0, max_level].
  static TGrid uniform(double max_level, std::size_t count = 101);

  const std::vector<double>& cutoffs() const { return cutoffs_; }
  const std::vector<double>& weights() const { return weights_; }  // trapezoid rule
  std::size_t size() const { return cutoffs_.size(); }

  bool operator==(const TGrid& other) const { return cutoffs_ == other.cutoffs_; }

 private:
  std::vector<double> cutoffs_;
  std::vector<double> weights_;
};

struct ProfileVector {
  std::shared_ptr<const TGrid> tgrid;
  std::vector<double> values;  // g(t_b), nonincreasing, g(0) = 1
};

ProfileVector profile(const DensityCurve& density, std::shared_ptr<const TGrid> tgrid);

/// sqrt of the trapezoid integral of (g_a - g_b)^2 over the t-grid.
double profile_distance(const ProfileVector& a, const ProfileVector& b);

/// Nearest-centroid cells in a weighted Euclidean space. For density
/// profiles the weights are the t-grid trapezoid weights, which makes the
/// squared distance the discretised squared profile distance; for class
/// probability vectors every weight is one.
struct Partition {
  std::vector<std::vector<double>> centroids;
  std::vector<double> weights;
  std::vector<std::size_t> assignments;  // cell of each input point
  std::vector<double> objective_trace;   // within-cell cost after each assignment pass
  std::size_t iterations = 0;

  std::size_t size() const { return centroids.size(); }
};

constexpr std::size_t kMaxLloydIterations = 100;

double weighted_sq_distance(std::span<const double> a, std::span<const double> b,
                            std::span<const double> weights);

std::size_t count_distinct(std::span<const std::vector<double>> points);

/// k-means++ seeding followed by Lloyd iterations (at most
/// kMaxLloydIterations, stopping once assignments are stable). Throws
/// InvalidArgument when J is 0 or exceeds the number of distinct points.
Partition build_partition(std::span<const std::vector<double>> points, std::span<const double> weights,
                          std::size_t num_cells, std::uint64_t seed);
Partition build_partition(std::span<const ProfileVector> profiles, std::size_t num_cells,
                          std::uint64_t seed);

/// Index of the closest centroid; ties go to the lowest index.
std::size_t assign_partition(const Partition& partition, std::span<const double> point);
std::size_t assign_partition(const Partition& partition, const ProfileVector& profile);

/// {y : f(y) >= t} with linear interpolation between grid points: each
/// maximal run of grid points at or above t becomes a closed interval whose
/// ends sit at the interpolated crossings of level t. Runs closer than 1.5
/// grid steps are merged.
Band threshold_band(const DensityCurve& density, double t);

struct CdSplitCalibration {
  std::shared_ptr<const ConditionalDensity> model;
  std::shared_ptr<const TGrid> tgrid;
  Partition partition;
  std::vector<ScoreSet> element_scores;  // f(y_i|x_i) per cell
  ScoreSet pooled_scores;                // fallback for empty cells
  double alpha = 0.1;
};

/// Default cell count: ceil(m / 100), at least one.
std::size_t default_num_cells(std::size_t calibration_size);

/// J is reduced to the number of distinct calibration profiles when larger.
/// Without an explicit t-grid, 101 levels span [0, max calibration density].
CdSplitCalibration calibrate_cd_split(std::shared_ptr<const ConditionalDensity> model,
                                      std::span<const Sample> calibration, std::size_t num_cells,
                                      double alpha, std::optional<TGrid> tgrid = std::nullopt,
                                      std::uint64_t seed = 0);

/// Cell of x and the density cutoff used there.
struct CdSplitQuery {
  DensityCurve density;
  std::size_t element;
  double cutoff;
};

CdSplitQuery cd_split_query(const CdSplitCalibration& calib, std::span<const double> x);
Band cd_split_band(const CdSplitCalibration& calib, std::span<const double> x);

// ---------------------------------------------------------------------------
// Classification: profiles are the estimated class-probability vectors and
// the distance is the plain sum of squared differences.

struct CdSplitClassCalibration {
  std::shared_ptr<const ClassifierModel> classifier;
  Partition partition;
  std::vector<ScoreSet> element_scores;  // P(Y = y_i | x_i) per cell
  ScoreSet pooled_scores;
  double alpha = 0.1;
};

CdSplitClassCalibration calibrate_cd_split_classifier(std::shared_ptr<const ClassifierModel> classifier,
                                                      std::span<const Sample> calibration,
                                                      std::size_t num_cells, double alpha,
                                                      std::uint64_t seed = 0);

LabelSet cd_split_labelset(const CdSplitClassCalibration& calib, std::span<const double> x);
LabelSet cd_split_labelset(std::shared_ptr<const ClassifierModel> classifier,
                           std::span<const Sample> calibration, std::size_t num_cells, double alpha,
                           std::span<const double> x, std::uint64_t seed = 0);

/// Labels whose probability is at least `cutoff`.
LabelSet threshold_labels(std::span<const double> probs, double cutoff);

/// One CSV row per calibration point: x_1..x_d,y,element.
void write_partition_diagnostic(std::ostream& out, std::span<const Sample> calibration,
                                std::span<const std::size_t> assignments);

}  // namespace cdsplit
