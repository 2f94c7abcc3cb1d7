#include "cdsplit/runner.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>
#include <tuple>

#include <json.hpp>

#include "cdsplit/baselines.hpp"
#include "cdsplit/cd_split.hpp"
#include "cdsplit/dist_split.hpp"
#include "cdsplit/log.hpp"
#include "cdsplit/metrics.hpp"

namespace cdsplit {
namespace {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

bool is_classification_method(Method m) { return m == Method::ProbabilitySplit || m == Method::CdSplit; }
bool is_regression_method(Method m) { return m != Method::ProbabilitySplit; }

// Lazily fitted estimators shared by all methods of one replicate. The fit
// time of each estimator is charged to every method that uses it.
class ReplicateModels {
 public:
  ReplicateModels(const ExperimentConfig& config, const Dataset& train)
      : config_(config), train_(train), k_(config.neighbors.value_or(default_neighbors(train.size()))) {
    k_ = std::min(k_, train.size());
  }

  std::shared_ptr<const ConditionalDensity> density(double& ms) {
    if (!density_) {
      const auto t0 = Clock::now();
      if (config_.density == DensityEstimator::Oracle) {
        density_ = std::make_shared<OracleDensity>(config_.scenario,
                                                   scenario_grid(config_.scenario, config_.grid_points));
      } else {
        CdeOptions opts;
        opts.neighbors = k_;
        opts.bandwidth = config_.bandwidth;
        opts.grid_points = config_.grid_points;
        density_ = std::make_shared<CdeModel>(fit_cde(train_, opts));
      }
      density_ms_ = elapsed_ms(t0);
    }
    ms += density_ms_;
    return density_;
  }

  std::shared_ptr<const RegressionModel> regression(double& ms) {
    if (!regression_) {
      const auto t0 = Clock::now();
      regression_ = std::make_shared<RegressionModel>(train_, k_);
      regression_ms_ = elapsed_ms(t0);
    }
    ms += regression_ms_;
    return regression_;
  }

  std::shared_ptr<const MadModel> mad(double& ms) {
    if (!mad_) {
      const auto reg = regression(ms);
      const auto t0 = Clock::now();
      mad_ = std::make_shared<MadModel>(train_, *reg, k_);
      mad_ms_ = elapsed_ms(t0);
    } else {
      regression(ms);
    }
    ms += mad_ms_;
    return mad_;
  }

  std::shared_ptr<const QuantileModel> quantile(double& ms) {
    if (!quantile_) {
      const auto t0 = Clock::now();
      quantile_ = std::make_shared<QuantileModel>(train_, k_);
      quantile_ms_ = elapsed_ms(t0);
    }
    ms += quantile_ms_;
    return quantile_;
  }

  std::shared_ptr<const ClassifierModel> classifier(double& ms) {
    if (!classifier_) {
      const auto t0 = Clock::now();
      classifier_ = std::make_shared<ClassifierModel>(
          fit_classifier(train_, config_.scenario.num_classes(), config_.classifier));
      classifier_ms_ = elapsed_ms(t0);
    }
    ms += classifier_ms_;
    return classifier_;
  }

 private:
  const ExperimentConfig& config_;
  const Dataset& train_;
  std::size_t k_;
  std::shared_ptr<const ConditionalDensity> density_;
  std::shared_ptr<const RegressionModel> regression_;
  std::shared_ptr<const MadModel> mad_;
  std::shared_ptr<const QuantileModel> quantile_;
  std::shared_ptr<const ClassifierModel> classifier_;
  double density_ms_ = 0, regression_ms_ = 0, mad_ms_ = 0, quantile_ms_ = 0, classifier_ms_ = 0;
};

template <typename BandFn>
std::vector<Band> bands_for(const Dataset& test, BandFn fn) {
  std::vector<Band> out;
  out.reserve(test.size());
  for (const auto& s : test) out.push_back(fn(s.features));
  return out;
}

template <typename SetFn>
std::vector<LabelSet> sets_for(const Dataset& test, SetFn fn) {
  std::vector<LabelSet> out;
  out.reserve(test.size());
  for (const auto& s : test) out.push_back(fn(s.features));
  return out;
}

std::size_t num_cells_for(const ExperimentConfig& config, std::size_t calibration_size) {
  if (config.num_cells) return *config.num_cells;
  return std::max<std::size_t>(1, (calibration_size + config.j_divisor - 1) / config.j_divisor);
}

MetricReport run_method(Method method, const ExperimentConfig& config, ReplicateModels& models,
                        const SplitPair& split, const Dataset& test,
                        const std::vector<TrueConditional>& truths, std::uint64_t partition_seed,
                        double& ms) {
  const double alpha = config.alpha;
  const auto& calib = split.calibration;
  if (config.scenario.is_classification()) {
    const auto clf = models.classifier(ms);
    std::vector<LabelSet> sets;
    if (method == Method::ProbabilitySplit) {
      const auto c = calibrate_probability_split(clf, calib, alpha);
      sets = sets_for(test, [&](auto x) { return probability_split_labelset(c, x); });
    } else {
      const auto c = calibrate_cd_split_classifier(clf, calib, num_cells_for(config, calib.size()),
                                                   alpha, partition_seed);
      sets = sets_for(test, [&](auto x) { return cd_split_labelset(c, x); });
    }
    return evaluate(sets, test, truths, alpha);
  }

  std::vector<Band> bands;
  switch (method) {
    case Method::DistSplit: {
      const auto c = calibrate_dist_split(models.density(ms), calib, alpha);
      bands = bands_for(test, [&](auto x) { return dist_split_band(c, x); });
      break;
    }
    case Method::CdSplit: {
      const auto c = calibrate_cd_split(models.density(ms), calib, num_cells_for(config, calib.size()),
                                        alpha, std::nullopt, partition_seed);
      bands = bands_for(test, [&](auto x) { return cd_split_band(c, x); });
      break;
    }
    case Method::RegSplit: {
      const auto c = calibrate_reg_split(models.regression(ms), calib, alpha);
      bands = bands_for(test, [&](auto x) { return reg_split_band(c, x); });
      break;
    }
    case Method::LocalRegSplit: {
      double counted_by_mad = 0.0;
      const auto mad = models.mad(ms);
      const auto c = calibrate_local_reg_split(models.regression(counted_by_mad), mad, calib, alpha);
      bands = bands_for(test, [&](auto x) { return local_reg_split_band(c, x); });
      break;
    }
    case Method::QuantileSplit: {
      const auto c = calibrate_quantile_split(models.quantile(ms), calib, alpha);
      bands = bands_for(test, [&](auto x) { return quantile_split_band(c, x); });
      break;
    }
    case Method::ProbabilitySplit:
      throw InvalidArgument("probability-split needs the classification scenario");
  }
  return evaluate(bands, test, truths, alpha);
}

template <typename T>
T get_number(const json& j, const char* key) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config key '") + key + "' has the wrong type");
  }
}

std::size_t get_count(const json& j, const char* key) {
  if (!j.is_number_integer() || j.get<long long>() < 0) {
    throw ConfigError(std::string("config key '") + key + "' must be a nonnegative integer");
  }
  return j.get<std::size_t>();
}

std::string get_string(const json& j, const char* key) {
  if (!j.is_string()) throw ConfigError(std::string("config key '") + key + "' must be a string");
  return j.get<std::string>();
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw InvalidArgument("malformed number '" + s + "' in CSV");
  }
  return v;
}

std::size_t parse_size(const std::string& s) {
  std::size_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw InvalidArgument("malformed integer '" + s + "' in CSV");
  }
  return v;
}

std::pair<double, double> mean_se(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  double mean = 0.0;
  for (double a : v) mean += a;
  mean /= n;
  if (v.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double a : v) ss += (a - mean) * (a - mean);
  return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

}  // namespace

std::string_view to_string(Method m) {
  switch (m) {
    case Method::DistSplit: return "dist-split";
    case Method::CdSplit: return "cd-split";
    case Method::RegSplit: return "reg-split";
    case Method::LocalRegSplit: return "local-reg-split";
    case Method::QuantileSplit: return "quantile-split";
    case Method::ProbabilitySplit: return "probability-split";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  for (Method m : {Method::DistSplit, Method::CdSplit, Method::RegSplit, Method::LocalRegSplit,
                   Method::QuantileSplit, Method::ProbabilitySplit}) {
    if (to_string(m) == name) return m;
  }
  throw ConfigError("unknown method '" + std::string(name) + "'");
}

void ExperimentConfig::validate() const {
  try {
    scenario.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  if (n_grid.empty()) throw ConfigError("n grid is empty");
  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    if (n_grid[i] < 2) throw ConfigError("every n must be at least 2");
    if (i > 0 && n_grid[i] <= n_grid[i - 1]) throw ConfigError("n grid must be strictly ascending");
  }
  if (replicates < 1) throw ConfigError("replicate count must be at least 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  if (!(split_ratio > 0.0 && split_ratio < 1.0)) throw ConfigError("split_ratio must lie in (0, 1)");
  if (methods.empty()) throw ConfigError("method list is empty");
  for (Method m : methods) {
    if (scenario.is_classification() && !is_classification_method(m)) {
      throw ConfigError(std::string(to_string(m)) + " does not apply to the classification scenario");
    }
    if (!scenario.is_classification() && !is_regression_method(m)) {
      throw ConfigError(std::string(to_string(m)) + " needs the classification scenario");
    }
  }
  if (neighbors && *neighbors < 1) throw ConfigError("k must be at least 1");
  if (bandwidth && !(*bandwidth > 0.0)) throw ConfigError("bandwidth must be positive");
  if (grid_points < 2) throw ConfigError("grid_points must be at least 2");
  if (num_cells && *num_cells < 1) throw ConfigError("J must be at least 1");
  if (j_divisor < 1) throw ConfigError("j_divisor must be at least 1");
  if (test_size < 1) throw ConfigError("test_size must be at least 1");
  if (classifier.steps < 0 || !(classifier.learning_rate > 0.0)) {
    throw ConfigError("classifier needs nonnegative steps and a positive learning rate");
  }
}

ExperimentConfig parse_config(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");

  ExperimentConfig c;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    const json& v = it.value();
    if (key == "scenario") {
      c.scenario.kind = parse_scenario_kind(get_string(v, "scenario"));
    } else if (key == "d") {
      c.scenario.d = get_count(v, "d");
    } else if (key == "n") {
      if (!v.is_array()) throw ConfigError("config key 'n' must be an array of integers");
      c.n_grid.clear();
      for (const auto& e : v) c.n_grid.push_back(get_count(e, "n"));
    } else if (key == "replicates") {
      c.replicates = get_count(v, "replicates");
    } else if (key == "alpha") {
      c.alpha = get_number<double>(v, "alpha");
    } else if (key == "seed") {
      c.seed = get_count(v, "seed");
    } else if (key == "methods") {
      if (!v.is_array()) throw ConfigError("config key 'methods' must be an array of strings");
      c.methods.clear();
      for (const auto& e : v) c.methods.push_back(parse_method(get_string(e, "methods")));
    } else if (key == "k") {
      if (!v.is_null()) c.neighbors = get_count(v, "k");
    } else if (key == "bandwidth") {
      if (!v.is_null()) c.bandwidth = get_number<double>(v, "bandwidth");
    } else if (key == "grid_points") {
      c.grid_points = get_count(v, "grid_points");
    } else if (key == "J") {
      if (!v.is_null()) c.num_cells = get_count(v, "J");
    } else if (key == "j_divisor") {
      c.j_divisor = get_count(v, "j_divisor");
    } else if (key == "test_size") {
      c.test_size = get_count(v, "test_size");
    } else if (key == "split_ratio") {
      c.split_ratio = get_number<double>(v, "split_ratio");
    } else if (key == "density_estimator") {
      const auto s = get_string(v, "density_estimator");
      if (s == "knn") c.density = DensityEstimator::Knn;
      else if (s == "oracle") c.density = DensityEstimator::Oracle;
      else throw ConfigError("density_estimator must be 'knn' or 'oracle'");
    } else if (key == "normal_parameter") {
      const auto s = get_string(v, "normal_parameter");
      if (s != "variance" && s != "sd") throw ConfigError("normal_parameter must be 'variance' or 'sd'");
      c.scenario.normal_variance = s == "variance";
    } else if (key == "gamma_parameter") {
      const auto s = get_string(v, "gamma_parameter");
      if (s != "rate" && s != "scale") throw ConfigError("gamma_parameter must be 'rate' or 'scale'");
      c.scenario.gamma_rate = s == "rate";
    } else if (key == "beta") {
      if (!v.is_array()) throw ConfigError("config key 'beta' must be an array of numbers");
      c.scenario.beta.clear();
      for (const auto& e : v) c.scenario.beta.push_back(get_number<double>(e, "beta"));
    } else if (key == "classifier_steps") {
      c.classifier.steps = static_cast<int>(get_count(v, "classifier_steps"));
    } else if (key == "classifier_learning_rate") {
      c.classifier.learning_rate = get_number<double>(v, "classifier_learning_rate");
    } else if (key == "record_wall_time") {
      if (!v.is_boolean()) throw ConfigError("config key 'record_wall_time' must be a boolean");
      c.record_wall_time = v.get<bool>();
    } else if (key == "output") {
      c.output = get_string(v, "output");
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  // The default method list is the regression one.
  if (!j.contains("methods") && c.scenario.is_classification()) {
    c.methods = {Method::CdSplit, Method::ProbabilitySplit};
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

ReplicateSeeds replicate_seeds(std::uint64_t master, std::size_t n, std::size_t replicate) {
  const std::uint64_t cell = derive_seed(derive_seed(master, n), replicate);
  return ReplicateSeeds{derive_seed(cell, 1), derive_seed(cell, 2), derive_seed(cell, 3),
                        derive_seed(cell, 4)};
}

std::vector<ResultRecord> run_replicate(const ExperimentConfig& config, std::size_t n,
                                        std::size_t replicate, std::vector<std::string>* failures) {
  const ReplicateSeeds seeds = replicate_seeds(config.seed, n, replicate);
  const Dataset data = sample_scenario(config.scenario, n, seeds.data);
  const Dataset test = sample_scenario(config.scenario, config.test_size, seeds.test);
  const SplitPair split = split_data(data, config.split_ratio, seeds.split);
  std::vector<TrueConditional> truths;
  truths.reserve(test.size());
  for (const auto& s : test) truths.emplace_back(config.scenario, s.features);

  ReplicateModels models(config, split.train);
  std::vector<ResultRecord> out;
  for (Method m : config.methods) {
    double ms = 0.0;
    try {
      const auto t0 = Clock::now();
      const MetricReport r = run_method(m, config, models, split, test, truths, seeds.partition, ms);
      ms += elapsed_ms(t0);
      out.push_back(ResultRecord{std::string(to_string(config.scenario.kind)), std::string(to_string(m)),
                                 n, replicate, r.marginal_coverage, r.ccad, r.avg_size,
                                 config.record_wall_time ? ms : 0.0});
    } catch (const std::exception& e) {
      const std::string msg = std::string(to_string(m)) + " failed at n=" + std::to_string(n) +
                              ", replicate " + std::to_string(replicate) + ": " + e.what();
      log_warning(msg);
      if (failures) failures->push_back(msg);
    }
  }
  return out;
}

void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& body) {
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(count, 1));
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto loop = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next = count;
      }
    }
  };
  if (workers == 1) {
    loop();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(loop);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
}

std::size_t default_workers() {
  if (const char* env = std::getenv("CDSPLIT_WORKERS")) {
    std::size_t v = 0;
    const std::string s(env);
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec == std::errc{} && v > 0) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<ResultRecord> run_experiment(const ExperimentConfig& config, std::size_t workers,
                                         std::vector<std::string>* failures) {
  config.validate();
  std::vector<std::pair<std::size_t, std::size_t>> tasks;
  for (std::size_t n : config.n_grid) {
    for (std::size_t r = 0; r < config.replicates; ++r) tasks.emplace_back(n, r);
  }
  std::vector<std::vector<ResultRecord>> results(tasks.size());
  std::vector<std::vector<std::string>> task_failures(tasks.size());
  parallel_for(tasks.size(), workers, [&](std::size_t i) {
    results[i] = run_replicate(config, tasks[i].first, tasks[i].second, &task_failures[i]);
  });
  std::vector<ResultRecord> out;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    out.insert(out.end(), results[i].begin(), results[i].end());
    if (failures) failures->insert(failures->end(), task_failures[i].begin(), task_failures[i].end());
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_csv(const std::vector<ResultRecord>& records, std::ostream& out) {
  out << kCsvHeader << '\n';
  for (const auto& r : records) {
    out << r.scenario << ',' << r.method << ',' << r.n << ',' << r.replicate << ','
        << format_double(r.marginal_coverage) << ',' << format_double(r.ccad) << ','
        << format_double(r.avg_size) << ',' << format_double(r.wall_ms) << '\n';
  }
}

void write_csv(const std::vector<ResultRecord>& records, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write '" + path + "'");
  write_csv(records, out);
}

std::vector<ResultRecord> read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) {
    throw InvalidArgument("CSV does not start with the results header");
  }
  std::vector<ResultRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 8) throw InvalidArgument("CSV row has " + std::to_string(f.size()) + " fields, expected 8");
    out.push_back(ResultRecord{f[0], f[1], parse_size(f[2]), parse_size(f[3]), parse_double(f[4]),
                               parse_double(f[5]), parse_double(f[6]), parse_double(f[7])});
  }
  return out;
}

std::vector<ResultRecord> read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open '" + path + "'");
  return read_csv(in);
}

std::vector<SummaryRow> summarize(const std::vector<ResultRecord>& records) {
  using Key = std::tuple<std::string, std::string, std::size_t>;
  std::vector<Key> order;
  std::map<Key, std::vector<const ResultRecord*>> groups;
  for (const auto& r : records) {
    Key key{r.scenario, r.method, r.n};
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) order.push_back(key);
    it->second.push_back(&r);
  }
  std::vector<SummaryRow> out;
  out.reserve(order.size());
  for (const auto& key : order) {
    const auto& rows = groups[key];
    std::vector<double> cov, dev, size, wall;
    for (const auto* r : rows) {
      cov.push_back(r->marginal_coverage);
      dev.push_back(r->ccad);
      size.push_back(r->avg_size);
      wall.push_back(r->wall_ms);
    }
    SummaryRow s;
    s.scenario = std::get<0>(key);
    s.method = std::get<1>(key);
    s.n = std::get<2>(key);
    s.count = rows.size();
    std::tie(s.marginal_coverage_mean, s.marginal_coverage_se) = mean_se(cov);
    std::tie(s.ccad_mean, s.ccad_se) = mean_se(dev);
    std::tie(s.avg_size_mean, s.avg_size_se) = mean_se(size);
    s.wall_ms_mean = mean_se(wall).first;
    out.push_back(std::move(s));
  }
  return out;
}

void write_summary_csv(const std::vector<SummaryRow>& rows, std::ostream& out) {
  out << kSummaryHeader << '\n';
  for (const auto& s : rows) {
    out << s.scenario << ',' << s.method << ',' << s.n << ',' << s.count << ','
        << format_double(s.marginal_coverage_mean) << ',' << format_double(s.marginal_coverage_se) << ','
        << format_double(s.ccad_mean) << ',' << format_double(s.ccad_se) << ','
        << format_double(s.avg_size_mean) << ',' << format_double(s.avg_size_se) << ','
        << format_double(s.wall_ms_mean) << '\n';
  }
}

void write_summary_csv(const std::vector<SummaryRow>& rows, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write '" + path + "'");
  write_summary_csv(rows, out);
}

void partition_dump(const ExperimentConfig& config, std::ostream& out) {
  config.validate();
  const std::size_t n = config.n_grid.front();
  const ReplicateSeeds seeds = replicate_seeds(config.seed, n, 0);
  const Dataset data = sample_scenario(config.scenario, n, seeds.data);
  const SplitPair split = split_data(data, config.split_ratio, seeds.split);
  ReplicateModels models(config, split.train);
  double ms = 0.0;
  const std::size_t cells = num_cells_for(config, split.calibration.size());
  if (config.scenario.is_classification()) {
    const auto c = calibrate_cd_split_classifier(models.classifier(ms), split.calibration, cells,
                                                 config.alpha, seeds.partition);
    write_partition_diagnostic(out, split.calibration, c.partition.assignments);
  } else {
    const auto c = calibrate_cd_split(models.density(ms), split.calibration, cells, config.alpha,
                                      std::nullopt, seeds.partition);
    write_partition_diagnostic(out, split.calibration, c.partition.assignments);
  }
}

}  // namespace cdsplit
