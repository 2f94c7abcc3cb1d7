#include <doctest.h>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include "cdsplit/runner.hpp"

using namespace cdsplit;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c = parse_config(R"({
    "scenario": "heteroscedastic", "n": [200], "replicates": 2, "seed": 7,
    "methods": ["dist-split"], "test_size": 100, "record_wall_time": false
  })");
  return c;
}

std::string csv_text(const std::vector<ResultRecord>& r) {
  std::ostringstream out;
  write_csv(r, out);
  return out.str();
}

}  // namespace

TEST_CASE("record count is methods x n x replicates") {
  const auto records = run_experiment(small_config());
  REQUIRE(records.size() == 2);
  CHECK(records[0].replicate == 0);
  CHECK(records[1].replicate == 1);
  CHECK(records[0].method == "dist-split");
  CHECK(records[0].scenario == "heteroscedastic");
  CHECK(records[0].n == 200);

  ExperimentConfig many = small_config();
  many.n_grid = {100, 150};
  many.methods = {Method::DistSplit, Method::CdSplit, Method::RegSplit, Method::LocalRegSplit,
                  Method::QuantileSplit};
  std::vector<std::string> failures;
  const auto all = run_experiment(many, 1, &failures);
  CHECK(failures.empty());
  REQUIRE(all.size() == 2 * 2 * 5);
  CHECK(all[0].n == 100);
  CHECK(all[0].method == "dist-split");
  CHECK(all[4].method == "quantile-split");
  CHECK(all[5].replicate == 1);
  CHECK(all.back().n == 150);
  for (const auto& r : all) {
    CHECK(std::isfinite(r.marginal_coverage));
    CHECK(std::isfinite(r.ccad));
    CHECK(r.avg_size >= 0.0);
  }
}

TEST_CASE("same seed gives identical CSV bytes regardless of worker count") {
  ExperimentConfig c = small_config();
  c.replicates = 5;
  c.methods = {Method::DistSplit, Method::CdSplit, Method::RegSplit};
  const std::string a = csv_text(run_experiment(c, 1));
  const std::string b = csv_text(run_experiment(c, 1));
  const std::string d = csv_text(run_experiment(c, 3));
  CHECK(a == b);
  CHECK(a == d);

  c.seed = 8;
  CHECK(csv_text(run_experiment(c, 1)) != a);
}

TEST_CASE("a replicate run alone matches its slot in the full run") {
  ExperimentConfig c = small_config();
  c.replicates = 3;
  const auto all = run_experiment(c, 2);
  const auto second = run_replicate(c, 200, 1);
  REQUIRE(second.size() == 1);
  CHECK(second[0] == all[1]);
  const auto s = replicate_seeds(7, 200, 1);
  const auto t = replicate_seeds(7, 200, 2);
  CHECK(s.data != t.data);
  CHECK(s.data != s.test);
}

TEST_CASE("classification experiment") {
  ExperimentConfig c = parse_config(R"({"scenario": "logistic-classification", "n": [300],
                                        "replicates": 2, "test_size": 100, "classifier_steps": 300})");
  REQUIRE(c.methods.size() == 2);
  const auto r = run_experiment(c);
  REQUIRE(r.size() == 4);
  CHECK(r[0].method == "cd-split");
  CHECK(r[1].method == "probability-split");
  for (const auto& rec : r) {
    CHECK(rec.avg_size >= 0.0);
    CHECK(rec.avg_size <= 7.0);
  }
}

TEST_CASE("config parsing") {
  const ExperimentConfig d = parse_config("{}");
  CHECK(d.alpha == 0.1);
  CHECK(d.n_grid == std::vector<std::size_t>{200, 500, 1000});
  CHECK(d.test_size == 1000);
  CHECK(d.scenario.kind == ScenarioKind::Homoscedastic);

  const ExperimentConfig c = parse_config(R"({"scenario": "bimodal", "d": 3, "alpha": 0.2, "J": 4,
      "k": 12, "bandwidth": 0.3, "grid_points": 300, "density_estimator": "oracle",
      "normal_parameter": "sd", "gamma_parameter": "scale", "output": "x.csv"})");
  CHECK(c.scenario.kind == ScenarioKind::Bimodal);
  CHECK(c.scenario.d == 3);
  CHECK(c.alpha == 0.2);
  CHECK(c.num_cells == std::optional<std::size_t>(4));
  CHECK(c.neighbors == std::optional<std::size_t>(12));
  CHECK(c.bandwidth == std::optional<double>(0.3));
  CHECK(c.grid_points == 300);
  CHECK(c.density == DensityEstimator::Oracle);
  CHECK_FALSE(c.scenario.normal_variance);
  CHECK_FALSE(c.scenario.gamma_rate);
  CHECK(c.output == "x.csv");
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS(parse_config("{"), ConfigError);
  CHECK_THROWS_AS(parse_config("[]"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"methds": ["dist-split"]})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"methods": ["dist-spilt"]})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"scenario": "nope"})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"n": [500, 200]})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"alpha": 1.5})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"replicates": 0})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"replicates": "ten"})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"methods": ["probability-split"]})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"scenario": "logistic", "methods": ["dist-split"]})"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
  CHECK(parse_method("local-reg-split") == Method::LocalRegSplit);
  CHECK(to_string(Method::QuantileSplit) == "quantile-split");
}

TEST_CASE("CSV writing and reading") {
  CHECK(csv_text({}) == std::string(kCsvHeader) + "\n");

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  std::vector<ResultRecord> records;
  for (int i = 0; i < 200; ++i) {
    records.push_back({"bimodal", "cd-split", static_cast<std::size_t>(i * 7), static_cast<std::size_t>(i),
                       u(rng) / 1e6, std::abs(u(rng)) * 1e-9, std::abs(u(rng)), std::abs(u(rng)) / 3.0});
  }
  std::istringstream in(csv_text(records));
  CHECK(read_csv(in) == records);

  std::istringstream bad("scenario,method\n");
  CHECK_THROWS_AS(read_csv(bad), InvalidArgument);
}

TEST_CASE("format_double round-trips") {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<std::uint64_t> bits;
  for (int i = 0; i < 2000; ++i) {
    double v;
    const std::uint64_t b = bits(rng);
    std::memcpy(&v, &b, sizeof v);
    if (!std::isfinite(v)) continue;
    CHECK(std::strtod(format_double(v).c_str(), nullptr) == v);
  }
  CHECK(format_double(0.5) == "0.5");
  CHECK(format_double(3.0) == "3");
}

TEST_CASE("summary means and standard errors") {
  std::vector<ResultRecord> r;
  r.push_back({"homoscedastic", "dist-split", 100, 0, 0.8, 0.1, 3.0, 1.0});
  r.push_back({"homoscedastic", "dist-split", 100, 1, 0.9, 0.2, 4.0, 2.0});
  r.push_back({"homoscedastic", "dist-split", 100, 2, 1.0, 0.3, 5.0, 3.0});
  r.push_back({"homoscedastic", "reg-split", 100, 0, 0.5, 0.5, 1.0, 0.0});
  const auto s = summarize(r);
  REQUIRE(s.size() == 2);
  CHECK(s[0].method == "dist-split");
  CHECK(s[0].count == 3);
  CHECK(s[0].marginal_coverage_mean == doctest::Approx(0.9));
  CHECK(s[0].avg_size_mean == doctest::Approx(4.0));
  CHECK(s[0].avg_size_se == doctest::Approx(1.0 / std::sqrt(3.0)));
  CHECK(s[0].ccad_se == doctest::Approx(0.1 / std::sqrt(3.0)));
  CHECK(s[0].wall_ms_mean == doctest::Approx(2.0));
  CHECK(s[1].count == 1);
  CHECK(s[1].avg_size_se == 0.0);

  std::ostringstream out;
  write_summary_csv(s, out);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == kSummaryHeader);
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 2);
}

TEST_CASE("partition dump") {
  ExperimentConfig c = small_config();
  c.num_cells = 3;
  std::ostringstream out;
  partition_dump(c, out);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "x_1,y,element");
  int rows = 0;
  std::set<std::string> cells;
  while (std::getline(in, line)) {
    ++rows;
    cells.insert(line.substr(line.rfind(',') + 1));
  }
  CHECK(rows == 100);
  CHECK(cells.size() <= 3);
  CHECK(cells.size() >= 2);
}

TEST_CASE("parallel_for visits every index and rethrows") {
  std::vector<std::atomic<int>> hits(100);
  parallel_for(100, 4, [&](std::size_t i) { hits[i]++; });
  for (auto& h : hits) CHECK(h.load() == 1);
  CHECK_THROWS_AS(parallel_for(10, 3, [](std::size_t i) {
                    if (i == 5) throw std::runtime_error("boom");
                  }),
                  std::runtime_error);
  parallel_for(0, 2, [](std::size_t) { FAIL("no work expected"); });
}

TEST_CASE("worker count from the environment") {
  ::setenv("CDSPLIT_WORKERS", "3", 1);
  CHECK(default_workers() == 3);
  ::setenv("CDSPLIT_WORKERS", "zero", 1);
  CHECK(default_workers() >= 1);
  ::unsetenv("CDSPLIT_WORKERS");
  CHECK(default_workers() >= 1);
}

TEST_CASE("dist-split marginal coverage over 200 replicates") {
  ExperimentConfig c = parse_config(R"({"scenario": "homoscedastic", "n": [1000], "replicates": 200,
                                        "methods": ["dist-split"], "seed": 2024})");
  const auto r = run_experiment(c, default_workers());
  REQUIRE(r.size() == 200);
  double mean = 0.0;
  for (const auto& rec : r) mean += rec.marginal_coverage;
  mean /= 200.0;
  CHECK(mean >= 0.89);
  CHECK(mean <= 0.92);
}
