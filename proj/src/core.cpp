#include "cdsplit/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace cdsplit {

void check_dimension(std::span<const Sample> data, std::size_t d) {
  for (const auto& s : data) {
    if (s.dimension() != d) {
      throw InvalidArgument("sample has " + std::to_string(s.dimension()) +
                            " features, expected " + std::to_string(d));
    }
  }
}

SplitPair split_data(std::span<const Sample> dataset, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw InvalidArgument("split ratio must lie in (0, 1)");
  }
  const std::size_t n = dataset.size();
  if (n < 2) {
    throw InsufficientData("split_data needs at least two samples");
  }
  // Both parts stay nonempty even when round() would empty one of them.
  auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::sort(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());

  SplitPair out;
  out.train.reserve(n_train);
  out.calibration.reserve(n - n_train);
  for (std::size_t i = 0; i < n; ++i) {
    (i < n_train ? out.train : out.calibration).push_back(dataset[order[i]]);
  }
  return out;
}

YGrid::YGrid(double lo, double hi, std::size_t count) : lo_(lo), spacing_(0.0), count_(count) {
  if (count < 2) throw InvalidArgument("YGrid needs at least two points");
  if (!std::isfinite(lo) || !std::isfinite(hi) || !(hi > lo)) {
    throw InvalidArgument("YGrid needs finite bounds with lo < hi");
  }
  spacing_ = (hi - lo) / static_cast<double>(count - 1);
}

std::vector<double> YGrid::points() const {
  std::vector<double> out(count_);
  for (std::size_t i = 0; i < count_; ++i) out[i] = (*this)[i];
  return out;
}

std::pair<std::size_t, double> YGrid::locate(double y) const {
  const double pos = (y - lo_) / spacing_;
  if (pos <= 0.0) return {0, 0.0};
  const double last = static_cast<double>(count_ - 1);
  if (pos >= last) return {count_ - 2, 1.0};
  const auto i = static_cast<std::size_t>(pos);
  return {i, pos - static_cast<double>(i)};
}

Band::Band(std::vector<Interval> intervals) : intervals_(std::move(intervals)) {
  for (std::size_t i = 0; i < intervals_.size(); ++i) {
    const auto& iv = intervals_[i];
    if (!std::isfinite(iv.lo) || !std::isfinite(iv.hi) || iv.lo > iv.hi) {
      throw InvalidArgument("band interval must satisfy lo <= hi");
    }
    if (i > 0 && !(intervals_[i - 1].hi < iv.lo)) {
      throw InvalidArgument("band intervals must be sorted and disjoint");
    }
  }
}

Band Band::merged(std::vector<Interval> intervals, double min_gap) {
  std::sort(intervals.begin(), intervals.end(),
            [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
  std::vector<Interval> out;
  for (const auto& iv : intervals) {
    const bool join = !out.empty() && (iv.lo <= out.back().hi || iv.lo - out.back().hi < min_gap);
    if (join) {
      out.back().hi = std::max(out.back().hi, iv.hi);
    } else {
      out.push_back(iv);
    }
  }
  return Band(std::move(out));
}

double band_size(const Band& band) {
  double total = 0.0;
  for (const auto& iv : band.intervals()) total += iv.hi - iv.lo;
  return total;
}

bool band_contains(const Band& band, double y) {
  const auto& ivs = band.intervals();
  auto it = std::upper_bound(ivs.begin(), ivs.end(), y,
                             [](double v, const Interval& iv) { return v < iv.lo; });
  if (it == ivs.begin()) return false;
  --it;
  return y <= it->hi;
}

Band band_union(const Band& a, const Band& b) {
  std::vector<Interval> all = a.intervals();
  all.insert(all.end(), b.intervals().begin(), b.intervals().end());
  return Band::merged(std::move(all));
}

LabelSet::LabelSet(std::vector<int> labels, int num_classes)
    : labels_(std::move(labels)), num_classes_(num_classes) {
  if (num_classes < 1) throw InvalidArgument("LabelSet needs at least one class");
  std::sort(labels_.begin(), labels_.end());
  labels_.erase(std::unique(labels_.begin(), labels_.end()), labels_.end());
  for (int l : labels_) {
    if (l < 0 || l >= num_classes) throw InvalidArgument("label outside {0..K-1}");
  }
}

bool LabelSet::contains(int label) const {
  return std::binary_search(labels_.begin(), labels_.end(), label);
}

ScoreSet::ScoreSet(std::vector<double> scores) : values_(std::move(scores)) {
  for (double s : values_) {
    if (!std::isfinite(s)) throw InvalidArgument("conformity scores must be finite");
  }
  sorted_ = values_;
  std::sort(sorted_.begin(), sorted_.end());
}

std::size_t upper_rank(std::size_t m, double level) {
  const double k = std::ceil(static_cast<double>(m + 1) * level);
  if (k <= 1.0) return 1;
  if (k >= static_cast<double>(m)) return m;
  return static_cast<std::size_t>(k);
}

std::size_t lower_rank(std::size_t m, double level) {
  const double k = std::floor(static_cast<double>(m + 1) * level);
  if (k <= 0.0) return 0;
  if (k >= static_cast<double>(m)) return m;
  return static_cast<std::size_t>(k);
}

double empirical_quantile(const ScoreSet& scores, double alpha) {
  if (scores.empty()) throw InsufficientData("empirical_quantile on an empty score set");
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("alpha must lie in (0, 1)");
  return scores.sorted()[upper_rank(scores.size(), alpha) - 1];
}

double lower_empirical_quantile(const ScoreSet& scores, double alpha) {
  if (scores.empty()) throw InsufficientData("lower_empirical_quantile on an empty score set");
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("alpha must lie in (0, 1)");
  const std::size_t k = lower_rank(scores.size(), alpha);
  if (k == 0) return -std::numeric_limits<double>::infinity();
  return scores.sorted()[k - 1];
}

}  // namespace cdsplit
