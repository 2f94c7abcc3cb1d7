// cdsplit: run conformal benchmark experiments and post-process their CSVs.
//
//   cdsplit run --config exp.json [--workers N] [--out results.csv]
//   cdsplit summarize --in results.csv --out summary.csv
//   cdsplit partition-dump --config exp.json --out partition.csv

#include <exception>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cdsplit/core.hpp"
#include "cdsplit/runner.hpp"

namespace {

constexpr int kConfigErrorExit = 2;
constexpr int kRuntimeErrorExit = 1;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Split-conformal prediction band benchmarks (Dist-split, CD-split and baselines)"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_path;
  std::string in_path;
  std::size_t workers = cdsplit::default_workers();

  auto* run = app.add_subcommand("run", "Run an experiment and write one CSV row per method and replicate");
  run->add_option("--config", config_path, "JSON experiment config")->required();
  run->add_option("--workers", workers, "Worker threads (default: $CDSPLIT_WORKERS or hardware threads)")
      ->check(CLI::PositiveNumber);
  run->add_option("--out", out_path, "Output CSV (default: the config's output field)");

  auto* summarize = app.add_subcommand("summarize", "Per (scenario, method, n) means and standard errors");
  summarize->add_option("--in", in_path, "Results CSV")->required();
  summarize->add_option("--out", out_path, "Summary CSV")->required();

  auto* dump = app.add_subcommand("partition-dump", "CD-split partition cell of every calibration point");
  dump->add_option("--config", config_path, "JSON experiment config")->required();
  dump->add_option("--out", out_path, "Output CSV")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const auto config = cdsplit::load_config(config_path);
      std::vector<std::string> failures;
      const auto records = cdsplit::run_experiment(config, workers, &failures);
      const std::string path = out_path.empty() ? config.output : out_path;
      cdsplit::write_csv(records, path);
      std::cerr << "wrote " << records.size() << " records to " << path;
      if (!failures.empty()) std::cerr << " (" << failures.size() << " method runs failed)";
      std::cerr << '\n';
    } else if (*summarize) {
      cdsplit::write_summary_csv(cdsplit::summarize(cdsplit::read_csv(in_path)), out_path);
    } else if (*dump) {
      const auto config = cdsplit::load_config(config_path);
      std::ofstream out(out_path, std::ios::binary);
      if (!out) throw cdsplit::InvalidArgument("cannot write '" + out_path + "'");
      cdsplit::partition_dump(config, out);
    }
  } catch (const cdsplit::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigErrorExit;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeErrorExit;
  }
  return 0;
}
