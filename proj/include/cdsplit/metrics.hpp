#pragma once

#include <cstddef>
#include <span>

#include "cdsplit/core.hpp"
#include "cdsplit/simulation.hpp"

namespace cdsplit {

struct MetricReport {
  double marginal_coverage = 0.0;
  double ccad = 0.0;      // mean |P(Y in C(x) | x) - (1 - alpha)|
  double avg_size = 0.0;  // Lebesgue measure, or label count for classification
  std::size_t n_test = 0;
};

/// P(Y in band | x) from the analytic CDF, summed over the intervals.
double conditional_coverage(const Band& band, const TrueConditional& truth);
/// Total true probability of the labels in the set.
double conditional_coverage(const LabelSet& labels, const TrueConditional& truth);

double ccad(std::span<const Band> bands, std::span<const TrueConditional> truths, double alpha);
double ccad(std::span<const LabelSet> sets, std::span<const TrueConditional> truths, double alpha);

double marginal_coverage(std::span<const Band> bands, std::span<const Sample> test);
double marginal_coverage(std::span<const LabelSet> sets, std::span<const Sample> test);

/// Throws InsufficientData on an empty list.
double avg_size(std::span<const Band> bands);
double avg_size(std::span<const LabelSet> sets);

/// alpha (b - a) + (a - y)_+ + (y - b)_+
double interval_loss(double a, double b, double y, double alpha);

MetricReport evaluate(std::span<const Band> bands, std::span<const Sample> test,
                      std::span<const TrueConditional> truths, double alpha);
MetricReport evaluate(std::span<const LabelSet> sets, std::span<const Sample> test,
                      std::span<const TrueConditional> truths, double alpha);

}  // namespace cdsplit
