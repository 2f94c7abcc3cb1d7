#include "cdsplit/dist_split.hpp"

#include <cmath>
#include <string>

#include "cdsplit/log.hpp"

namespace cdsplit {

DistSplitCalibration calibrate_dist_split(std::shared_ptr<const ConditionalDensity> model,
                                          std::span<const Sample> calibration, double alpha) {
  if (!model) throw InvalidArgument("dist-split needs a conditional density model");
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("alpha must lie in (0, 1)");
  if (calibration.empty()) throw InsufficientData("dist-split calibration set is empty");
  check_dimension(calibration, model->dimension());

  std::vector<double> scores;
  scores.reserve(calibration.size());
  for (const auto& s : calibration) scores.push_back(model->cdf(s.features).at(s.target));
  return DistSplitCalibration{std::move(model), ScoreSet(std::move(scores)), alpha};
}

std::pair<double, double> dist_split_cutoffs(const DistSplitCalibration& calib) {
  const double t1 = std::max(lower_empirical_quantile(calib.scores, 0.5 * calib.alpha), 0.0);
  const double t2 = empirical_quantile(calib.scores, 1.0 - 0.5 * calib.alpha);
  return {t1, t2};
}

Band dist_split_band(const DistSplitCalibration& calib, std::span<const double> x) {
  const auto [t1, t2] = dist_split_cutoffs(calib);
  const CdfCurve cdf = calib.model->cdf(x);
  if (t1 > t2) {
    log_warning("dist-split cutoffs crossed (t1=" + std::to_string(t1) + ", t2=" +
                std::to_string(t2) + "); returning the median point");
    const double mid = cdf_inverse(cdf, 0.5);
    return Band({{mid, mid}});
  }
  return Band({{cdf_inverse(cdf, t1), cdf_inverse(cdf, t2)}});
}

}  // namespace cdsplit
