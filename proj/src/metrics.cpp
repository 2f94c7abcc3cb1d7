#include "cdsplit/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace cdsplit {
namespace {

template <typename Set>
double ccad_impl(std::span<const Set> sets, std::span<const TrueConditional> truths, double alpha) {
  if (sets.size() != truths.size()) throw InvalidArgument("one truth per prediction set is required");
  if (sets.empty()) throw InsufficientData("ccad of an empty list");
  double total = 0.0;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    total += std::abs(conditional_coverage(sets[i], truths[i]) - (1.0 - alpha));
  }
  return total / static_cast<double>(sets.size());
}

template <typename Set, typename Contains>
double marginal_impl(std::span<const Set> sets, std::span<const Sample> test, Contains contains) {
  if (sets.size() != test.size()) throw InvalidArgument("one test sample per prediction set is required");
  if (sets.empty()) throw InsufficientData("marginal coverage of an empty list");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < sets.size(); ++i) hit += contains(sets[i], test[i]) ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(sets.size());
}

}  // namespace

double conditional_coverage(const Band& band, const TrueConditional& truth) {
  double total = 0.0;
  for (const auto& iv : band.intervals()) total += truth.cdf(iv.hi) - truth.cdf(iv.lo);
  return std::clamp(total, 0.0, 1.0);
}

double conditional_coverage(const LabelSet& labels, const TrueConditional& truth) {
  const auto& probs = truth.label_probs();
  double total = 0.0;
  for (int l : labels.labels()) {
    if (static_cast<std::size_t>(l) >= probs.size()) throw InvalidArgument("label outside the true law");
    total += probs[static_cast<std::size_t>(l)];
  }
  return std::clamp(total, 0.0, 1.0);
}

double ccad(std::span<const Band> bands, std::span<const TrueConditional> truths, double alpha) {
  return ccad_impl(bands, truths, alpha);
}

double ccad(std::span<const LabelSet> sets, std::span<const TrueConditional> truths, double alpha) {
  return ccad_impl(sets, truths, alpha);
}

double marginal_coverage(std::span<const Band> bands, std::span<const Sample> test) {
  return marginal_impl(bands, test, [](const Band& b, const Sample& s) { return band_contains(b, s.target); });
}

double marginal_coverage(std::span<const LabelSet> sets, std::span<const Sample> test) {
  return marginal_impl(sets, test, [](const LabelSet& l, const Sample& s) { return l.contains(s.label()); });
}

double avg_size(std::span<const Band> bands) {
  if (bands.empty()) throw InsufficientData("average size of an empty list");
  double total = 0.0;
  for (const auto& b : bands) total += band_size(b);
  return total / static_cast<double>(bands.size());
}

double avg_size(std::span<const LabelSet> sets) {
  if (sets.empty()) throw InsufficientData("average size of an empty list");
  double total = 0.0;
  for (const auto& s : sets) total += static_cast<double>(s.size());
  return total / static_cast<double>(sets.size());
}

double interval_loss(double a, double b, double y, double alpha) {
  return alpha * (b - a) + std::max(a - y, 0.0) + std::max(y - b, 0.0);
}

MetricReport evaluate(std::span<const Band> bands, std::span<const Sample> test,
                      std::span<const TrueConditional> truths, double alpha) {
  return MetricReport{marginal_coverage(bands, test), ccad(bands, truths, alpha), avg_size(bands),
                      bands.size()};
}

MetricReport evaluate(std::span<const LabelSet> sets, std::span<const Sample> test,
                      std::span<const TrueConditional> truths, double alpha) {
  return MetricReport{marginal_coverage(sets, test), ccad(sets, truths, alpha), avg_size(sets),
                      sets.size()};
}

}  // namespace cdsplit
