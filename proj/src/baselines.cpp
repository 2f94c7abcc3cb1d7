#include "cdsplit/baselines.hpp"

#include <cmath>
#include <string>

#include "cdsplit/cd_split.hpp"

namespace cdsplit {
namespace {

void check_common(std::span<const Sample> calibration, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("alpha must lie in (0, 1)");
  if (calibration.empty()) throw InsufficientData("baseline calibration set is empty");
}

void expect(const BaselineCalibration& calib, BaselineMethod m) {
  if (calib.method != m) {
    throw InvalidArgument(std::string("calibration is for ") + std::string(to_string(calib.method)) +
                          ", not " + std::string(to_string(m)));
  }
}

BaselineCalibration make_calibration(BaselineMethod method, std::vector<double> scores, double alpha) {
  BaselineCalibration out;
  out.method = method;
  out.scores = ScoreSet(std::move(scores));
  out.alpha = alpha;
  return out;
}

}  // namespace

std::string_view to_string(BaselineMethod m) {
  switch (m) {
    case BaselineMethod::RegSplit: return "reg-split";
    case BaselineMethod::LocalRegSplit: return "local-reg-split";
    case BaselineMethod::QuantileSplit: return "quantile-split";
    case BaselineMethod::ProbabilitySplit: return "probability-split";
  }
  return "unknown";
}

BaselineCalibration calibrate_reg_split(PointPredictor center, std::span<const Sample> calibration,
                                        double alpha) {
  check_common(calibration, alpha);
  std::vector<double> scores;
  scores.reserve(calibration.size());
  for (const auto& s : calibration) scores.push_back(std::abs(s.target - center(s.features)));
  BaselineCalibration out = make_calibration(BaselineMethod::RegSplit, std::move(scores), alpha);
  out.center = std::move(center);
  return out;
}

BaselineCalibration calibrate_reg_split(std::shared_ptr<const RegressionModel> regression,
                                        std::span<const Sample> calibration, double alpha) {
  if (!regression) throw InvalidArgument("reg-split needs a regression model");
  return calibrate_reg_split([r = std::move(regression)](std::span<const double> x) { return r->predict(x); },
                             calibration, alpha);
}

BaselineCalibration calibrate_local_reg_split(PointPredictor center, PointPredictor scale,
                                              std::span<const Sample> calibration, double alpha) {
  check_common(calibration, alpha);
  std::vector<double> scores;
  scores.reserve(calibration.size());
  for (const auto& s : calibration) {
    const double rho = scale(s.features);
    if (!(rho > 0.0)) throw InvalidArgument("local-reg-split scale must be positive");
    scores.push_back(std::abs(s.target - center(s.features)) / rho);
  }
  BaselineCalibration out = make_calibration(BaselineMethod::LocalRegSplit, std::move(scores), alpha);
  out.center = std::move(center);
  out.scale = std::move(scale);
  return out;
}

BaselineCalibration calibrate_local_reg_split(std::shared_ptr<const RegressionModel> regression,
                                              std::shared_ptr<const MadModel> mad,
                                              std::span<const Sample> calibration, double alpha) {
  if (!regression || !mad) throw InvalidArgument("local-reg-split needs regression and MAD models");
  return calibrate_local_reg_split(
      [r = std::move(regression)](std::span<const double> x) { return r->predict(x); },
      [m = std::move(mad)](std::span<const double> x) { return m->predict(x); }, calibration, alpha);
}

BaselineCalibration calibrate_quantile_split(PointPredictor lower, PointPredictor upper,
                                             std::span<const Sample> calibration, double alpha) {
  check_common(calibration, alpha);
  std::vector<double> scores;
  scores.reserve(calibration.size());
  for (const auto& s : calibration) {
    scores.push_back(std::max(lower(s.features) - s.target, s.target - upper(s.features)));
  }
  BaselineCalibration out = make_calibration(BaselineMethod::QuantileSplit, std::move(scores), alpha);
  out.lower = std::move(lower);
  out.upper = std::move(upper);
  return out;
}

BaselineCalibration calibrate_quantile_split(std::shared_ptr<const QuantileModel> quantiles,
                                             std::span<const Sample> calibration, double alpha) {
  if (!quantiles) throw InvalidArgument("quantile-split needs a quantile model");
  const double lo_p = 0.5 * alpha;
  const double hi_p = 1.0 - 0.5 * alpha;
  return calibrate_quantile_split(
      [q = quantiles, lo_p](std::span<const double> x) { return q->predict(x, lo_p); },
      [q = quantiles, hi_p](std::span<const double> x) { return q->predict(x, hi_p); }, calibration,
      alpha);
}

BaselineCalibration calibrate_probability_split(std::shared_ptr<const ClassifierModel> classifier,
                                                std::span<const Sample> calibration, double alpha) {
  if (!classifier) throw InvalidArgument("probability-split needs a classifier");
  check_common(calibration, alpha);
  check_dimension(calibration, classifier->dimension());
  std::vector<double> scores;
  scores.reserve(calibration.size());
  for (const auto& s : calibration) {
    if (s.label() < 0 || s.label() >= classifier->num_classes()) {
      throw InvalidArgument("calibration label outside {0..K-1}");
    }
    scores.push_back(classifier->predict_probs(s.features)[static_cast<std::size_t>(s.label())]);
  }
  BaselineCalibration out = make_calibration(BaselineMethod::ProbabilitySplit, std::move(scores), alpha);
  out.classifier = std::move(classifier);
  return out;
}

double baseline_score_cutoff(const BaselineCalibration& calib) {
  return empirical_quantile(calib.scores, 1.0 - calib.alpha);
}

Band reg_split_band(const BaselineCalibration& calib, std::span<const double> x) {
  expect(calib, BaselineMethod::RegSplit);
  const double q = baseline_score_cutoff(calib);
  const double r = calib.center(x);
  return Band({{r - q, r + q}});
}

Band local_reg_split_band(const BaselineCalibration& calib, std::span<const double> x) {
  expect(calib, BaselineMethod::LocalRegSplit);
  const double q = baseline_score_cutoff(calib);
  const double r = calib.center(x);
  const double half = q * calib.scale(x);
  return Band({{r - half, r + half}});
}

Band quantile_split_band(const BaselineCalibration& calib, std::span<const double> x) {
  expect(calib, BaselineMethod::QuantileSplit);
  const double e = baseline_score_cutoff(calib);
  const double lo = calib.lower(x) - e;
  const double hi = calib.upper(x) + e;
  if (lo > hi) return Band{};
  return Band({{lo, hi}});
}

LabelSet probability_split_labelset(const BaselineCalibration& calib, std::span<const double> x) {
  expect(calib, BaselineMethod::ProbabilitySplit);
  const double cutoff = lower_empirical_quantile(calib.scores, calib.alpha);
  return threshold_labels(calib.classifier->predict_probs(x), cutoff);
}

}  // namespace cdsplit
