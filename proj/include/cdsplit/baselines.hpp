#pragma once

// Split-conformal comparison methods. Each calibrates a score on the
// calibration half and turns its quantile into a band at new points:
//   reg-split        |y - r(x)|                      -> r(x) +/- q
//   local-reg-split  |y - r(x)| / rho(x)             -> r(x) +/- q rho(x)
//   quantile-split   max(lo(x) - y, y - hi(x))       -> [lo(x) - E, hi(x) + E]
//   probability-split P(Y = y|x)                     -> {y : P(y|x) >= cutoff}
// Point predictors are plain callables so fitted k-NN models and analytic
// stand-ins plug in the same way.

#include <functional>
#include <memory>
#include <span>
#include <string_view>

#include "cdsplit/core.hpp"
#include "cdsplit/estimators.hpp"

namespace cdsplit {

enum class BaselineMethod { RegSplit, LocalRegSplit, QuantileSplit, ProbabilitySplit };

std::string_view to_string(BaselineMethod m);

using PointPredictor = std::function<double(std::span<const double>)>;

struct BaselineCalibration {
  BaselineMethod method = BaselineMethod::RegSplit;
  ScoreSet scores;
  double alpha = 0.1;
  PointPredictor center;  // r(x); reg-split and local-reg-split
  PointPredictor scale;   // rho(x); local-reg-split
  PointPredictor lower;   // q_{alpha/2}(x); quantile-split
  PointPredictor upper;   // q_{1-alpha/2}(x); quantile-split
  std::shared_ptr<const ClassifierModel> classifier;  // probability-split
};

BaselineCalibration calibrate_reg_split(PointPredictor center, std::span<const Sample> calibration,
                                        double alpha);
BaselineCalibration calibrate_reg_split(std::shared_ptr<const RegressionModel> regression,
                                        std::span<const Sample> calibration, double alpha);

BaselineCalibration calibrate_local_reg_split(PointPredictor center, PointPredictor scale,
                                              std::span<const Sample> calibration, double alpha);
BaselineCalibration calibrate_local_reg_split(std::shared_ptr<const RegressionModel> regression,
                                              std::shared_ptr<const MadModel> mad,
                                              std::span<const Sample> calibration, double alpha);

BaselineCalibration calibrate_quantile_split(PointPredictor lower, PointPredictor upper,
                                             std::span<const Sample> calibration, double alpha);
/// Uses the alpha/2 and 1 - alpha/2 conditional quantiles of `quantiles`.
BaselineCalibration calibrate_quantile_split(std::shared_ptr<const QuantileModel> quantiles,
                                             std::span<const Sample> calibration, double alpha);

BaselineCalibration calibrate_probability_split(std::shared_ptr<const ClassifierModel> classifier,
                                                std::span<const Sample> calibration, double alpha);

/// Width quantile q = empirical_quantile(scores, 1 - alpha)
double baseline_score_cutoff(const BaselineCalibration& calib);

Band reg_split_band(const BaselineCalibration& calib, std::span<const double> x);
Band local_reg_split_band(const BaselineCalibration& calib, std::span<const double> x);
/// Empty when a negative correction makes the interval cross over.
Band quantile_split_band(const BaselineCalibration& calib, std::span<const double> x);
LabelSet probability_split_labelset(const BaselineCalibration& calib, std::span<const double> x);

}  // namespace cdsplit
