#pragma once

// Dist-split: conformalise the estimated conditional CDF. Calibration scores
// are F(y_i|x_i); the band at a new x is the set of y whose F(y|x) falls
// between a lower and an upper order statistic of those scores.

#include <memory>
#include <span>

#include "cdsplit/core.hpp"
#include "cdsplit/estimators.hpp"

namespace cdsplit {

struct DistSplitCalibration {
  std::shared_ptr<const ConditionalDensity> model;
  ScoreSet scores;  // F(y_i|x_i), one per calibration sample, in input order
  double alpha = 0.1;
};

DistSplitCalibration calibrate_dist_split(std::shared_ptr<const ConditionalDensity> model,
                                          std::span<const Sample> calibration, double alpha);

/// Score cutoffs (t1, t2). t1 uses the floor((m+1) alpha/2)-th smallest
/// score (0 when that rank is 0), t2 the ceil((m+1)(1 - alpha/2))-th.
std::pair<double, double> dist_split_cutoffs(const DistSplitCalibration& calib);

/// [F^-1(t1|x), F^-1(t2|x)]; always a single interval.
Band dist_split_band(const DistSplitCalibration& calib, std::span<const double> x);

}  // namespace cdsplit
