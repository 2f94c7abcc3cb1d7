#pragma once

// Shared data model: samples, splits, target grids, bands, label sets and
// conformity-score sets, plus the empirical quantile convention used by every
// method in the library.

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cdsplit {

class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class InsufficientData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One observation. `target` holds the response for regression and the
/// label index (stored as a double) for classification.
struct Sample {
  std::vector<double> features;
  double target = 0.0;

  std::size_t dimension() const { return features.size(); }
  int label() const { return static_cast<int>(target); }
};

using Dataset = std::vector<Sample>;

/// Checks that every sample has `d` features. Throws InvalidArgument.
void check_dimension(std::span<const Sample> data, std::size_t d);

struct SplitPair {
  Dataset train;
  Dataset calibration;
};

/// Random split into a training part of round(ratio * n) samples and a
/// calibration part holding the rest. Both parts are nonempty.
SplitPair split_data(std::span<const Sample> dataset, double ratio, std::uint64_t seed);

/// Uniform grid over the target space.
class YGrid {
 public:
  YGrid(double lo, double hi, std::size_t count);

  std::size_t size() const { return count_; }
  double lo() const { return lo_; }
  double hi() const { return lo_ + spacing_ * static_cast<double>(count_ - 1); }
  double spacing() const { return spacing_; }
  double operator[](std::size_t i) const { return lo_ + spacing_ * static_cast<double>(i); }
  std::vector<double> points() const;

  /// Trapezoid quadrature weight of grid point i.
  double weight(std::size_t i) const {
    return (i == 0 || i + 1 == count_) ? 0.5 * spacing_ : spacing_;
  }

  /// Cell containing y: index i with grid[i] <= y <= grid[i+1] and the
  /// fractional position inside it. Requires lo() <= y <= hi().
  std::pair<std::size_t, double> locate(double y) const;

  bool operator==(const YGrid& other) const {
    return count_ == other.count_ && lo_ == other.lo_ && spacing_ == other.spacing_;
  }

 private:
  double lo_;
  double spacing_;
  std::size_t count_;
};

struct Interval {
  double lo;
  double hi;

  bool operator==(const Interval&) const = default;
};

/// Prediction set over the reals: sorted, pairwise disjoint closed intervals.
class Band {
 public:
  Band() = default;
  /// Validates ordering and disjointness; throws InvalidArgument.
  explicit Band(std::vector<Interval> intervals);

  /// Sorts the intervals and merges any two separated by less than `min_gap`
  /// (overlapping ones always merge).
  static Band merged(std::vector<Interval> intervals, double min_gap = 0.0);

  const std::vector<Interval>& intervals() const { return intervals_; }
  bool empty() const { return intervals_.empty(); }
  std::size_t count() const { return intervals_.size(); }

  bool operator==(const Band&) const = default;

 private:
  std::vector<Interval> intervals_;
};

double band_size(const Band& band);
bool band_contains(const Band& band, double y);
Band band_union(const Band& a, const Band& b);

class LabelSet {
 public:
  LabelSet() = default;
  LabelSet(std::vector<int> labels, int num_classes);

  const std::vector<int>& labels() const { return labels_; }
  int num_classes() const { return num_classes_; }
  std::size_t size() const { return labels_.size(); }
  bool contains(int label) const;

  bool operator==(const LabelSet&) const = default;

 private:
  std::vector<int> labels_;
  int num_classes_ = 0;
};

/// Conformity scores. Keeps the scores in input order and a sorted copy for
/// order-statistic queries.
class ScoreSet {
 public:
  ScoreSet() = default;
  explicit ScoreSet(std::vector<double> scores);

  const std::vector<double>& values() const { return values_; }
  const std::vector<double>& sorted() const { return sorted_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

 private:
  std::vector<double> values_;
  std::vector<double> sorted_;
};

/// 1-based order-statistic index ceil((m + 1) * level), clamped to [1, m].
/// `level` may be anywhere in [0, 1].
std::size_t upper_rank(std::size_t m, double level);

/// 1-based index floor((m + 1) * level), clamped to [0, m]; 0 means "below
/// every score".
std::size_t lower_rank(std::size_t m, double level);

/// The k-th smallest score with k = ceil((m + 1) * alpha) clamped to [1, m].
/// With this convention P(S_new <= q) lies in [alpha, alpha + 1/(m+1)] for
/// exchangeable continuous scores, which is what upper cutoffs on
/// nonconformity scores need.
double empirical_quantile(const ScoreSet& scores, double alpha);

/// Lower-tail cutoff: the k-th smallest score with k = floor((m + 1) * alpha),
/// or -infinity when k = 0. For exchangeable continuous scores
/// P(S_new >= q) lies in [1 - alpha, 1 - alpha + 1/(m+1)], which is the
/// guarantee needed when small conformity scores are excluded.
double lower_empirical_quantile(const ScoreSet& scores, double alpha);

}  // namespace cdsplit
