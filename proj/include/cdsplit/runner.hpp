#pragma once

// Experiment orchestration: for every sample size and replicate, draw data,
// split it once, fit and calibrate every requested method on that same split,
// and score the bands on a fresh test set against the true conditional law.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cdsplit/estimators.hpp"
#include "cdsplit/simulation.hpp"

namespace cdsplit {

enum class Method { DistSplit, CdSplit, RegSplit, LocalRegSplit, QuantileSplit, ProbabilitySplit };

std::string_view to_string(Method m);
/// Throws ConfigError on an unknown name.
Method parse_method(std::string_view name);

enum class DensityEstimator { Knn, Oracle };

struct ExperimentConfig {
  Scenario scenario;
  std::vector<std::size_t> n_grid = {200, 500, 1000};
  std::size_t replicates = 10;
  double alpha = 0.1;
  std::uint64_t seed = 1;
  std::vector<Method> methods = {Method::DistSplit, Method::CdSplit, Method::RegSplit,
                                 Method::LocalRegSplit, Method::QuantileSplit};
  std::optional<std::size_t> neighbors;   // k for every k-NN estimator; default ceil(sqrt(n_train))
  std::optional<double> bandwidth;        // CDE kernel bandwidth; default rule otherwise
  std::size_t grid_points = 500;
  std::optional<std::size_t> num_cells;   // fixed J; default ceil(m / j_divisor)
  std::size_t j_divisor = 100;
  std::size_t test_size = 1000;
  double split_ratio = 0.5;
  DensityEstimator density = DensityEstimator::Knn;
  ClassifierOptions classifier;
  bool record_wall_time = true;  // false writes wall_ms = 0 for byte-stable output
  std::string output = "results.csv";

  /// Throws ConfigError.
  void validate() const;
};

/// Parses the JSON config schema documented in the README. Unknown keys
/// and invalid values raise ConfigError.
ExperimentConfig parse_config(std::string_view json_text);
ExperimentConfig load_config(const std::string& path);

struct ResultRecord {
  std::string scenario;
  std::string method;
  std::size_t n = 0;
  std::size_t replicate = 0;
  double marginal_coverage = 0.0;
  double ccad = 0.0;
  double avg_size = 0.0;
  double wall_ms = 0.0;

  bool operator==(const ResultRecord&) const = default;
};

/// Seeds of one replicate, derived from the master seed only.
struct ReplicateSeeds {
  std::uint64_t data;
  std::uint64_t test;
  std::uint64_t split;
  std::uint64_t partition;
};
ReplicateSeeds replicate_seeds(std::uint64_t master, std::size_t n, std::size_t replicate);

/// Records of one (n, replicate) cell, one per method in config order.
/// Methods that throw are reported through `failures` and skipped.
std::vector<ResultRecord> run_replicate(const ExperimentConfig& config, std::size_t n,
                                        std::size_t replicate,
                                        std::vector<std::string>* failures = nullptr);

/// All records, ordered by n, then replicate, then method order.
std::vector<ResultRecord> run_experiment(const ExperimentConfig& config, std::size_t workers = 1,
                                         std::vector<std::string>* failures = nullptr);

/// Runs body(i) for i in [0, count) on `workers` threads. The first
/// exception thrown by any body is rethrown after all workers stop.
void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& body);

/// CDSPLIT_WORKERS when set to a positive integer, else the hardware
/// concurrency (at least 1).
std::size_t default_workers();

inline constexpr std::string_view kCsvHeader =
    "scenario,method,n,replicate,marginal_coverage,ccad,avg_size,wall_ms";

void write_csv(const std::vector<ResultRecord>& records, std::ostream& out);
void write_csv(const std::vector<ResultRecord>& records, const std::string& path);
std::vector<ResultRecord> read_csv(std::istream& in);
std::vector<ResultRecord> read_csv(const std::string& path);

struct SummaryRow {
  std::string scenario;
  std::string method;
  std::size_t n = 0;
  std::size_t count = 0;
  double marginal_coverage_mean = 0.0;
  double marginal_coverage_se = 0.0;
  double ccad_mean = 0.0;
  double ccad_se = 0.0;
  double avg_size_mean = 0.0;
  double avg_size_se = 0.0;
  double wall_ms_mean = 0.0;
};

/// Means and standard errors per (scenario, method, n), in first-seen order.
std::vector<SummaryRow> summarize(const std::vector<ResultRecord>& records);

inline constexpr std::string_view kSummaryHeader =
    "scenario,method,n,count,marginal_coverage_mean,marginal_coverage_se,ccad_mean,ccad_se,"
    "avg_size_mean,avg_size_se,wall_ms_mean";

void write_summary_csv(const std::vector<SummaryRow>& rows, std::ostream& out);
void write_summary_csv(const std::vector<SummaryRow>& rows, const std::string& path);

/// Partition diagnostic for the first n in the grid, replicate 0: CD-split
/// cell of every calibration point.
void partition_dump(const ExperimentConfig& config, std::ostream& out);

/// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);

}  // namespace cdsplit
