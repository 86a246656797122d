#include <cstdlib>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cmit/error.hpp"
#include "cmit/log.hpp"
#include "cmit/pipeline.hpp"
#include "cmit/stats.hpp"
#include "cmit/version.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitPartial = 1;   // some datasets failed or statistics degenerate
constexpr int kExitBadInput = 2;  // invalid config/arguments/input files

int cmd_generate(std::size_t clusters, std::size_t days, std::uint64_t seed,
                 const std::string& out_dir) {
  const auto paths = cmit::generate_datasets(clusters, days, seed, out_dir);
  std::cout << "wrote " << paths.size() << " datasets under " << out_dir << "\n";
  for (const auto& p : paths) std::cout << "  " << p.string() << "\n";
  return kExitOk;
}

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed,
            std::optional<std::string> out, std::optional<std::size_t> workers,
            std::optional<std::string> norm, std::optional<std::string> position_update) {
  cmit::RunConfig cfg = cmit::run_config_from_file(config_path);
  if (seed) cfg.seed = *seed;
  if (out) cfg.out_dir = *out;
  if (workers) cfg.workers = *workers;
  if (norm) {
    if (*norm == "layer") {
      cfg.norms = cmit::NormSelection::layer_only;
    } else if (*norm == "cloud") {
      cfg.norms = cmit::NormSelection::cloud_only;
    } else if (*norm == "both") {
      cfg.norms = cmit::NormSelection::both;
    } else {
      throw cmit::ConfigError("--norm must be layer|cloud|both");
    }
  }
  if (position_update) {
    if (*position_update == "paper") {
      cfg.swarm.position_update = cmit::PositionUpdate::paper;
    } else if (*position_update == "standard") {
      cfg.swarm.position_update = cmit::PositionUpdate::standard;
    } else {
      throw cmit::ConfigError("--position-update must be paper|standard");
    }
  }
  const auto result = cmit::run_pipeline(cfg);
  std::cout << "datasets: " << result.outcomes.size() << ", failed: " << result.failures
            << "\n";
  if (!result.eval_table_path.empty()) {
    std::cout << "eval table: " << result.eval_table_path.string() << "\n";
  }
  for (const auto& o : result.outcomes) {
    if (!o.ok) std::cout << "  FAILED " << o.id << ": " << o.error << "\n";
  }
  return result.failures == 0 ? kExitOk : kExitPartial;
}

int cmd_stats(const std::string& table_path, const std::string& out_dir, bool with_svg) {
  const auto table = cmit::load_eval_table(table_path);
  const auto report = cmit::emit_report(table, out_dir, with_svg);
  std::cout << "wrote " << report.files.mape_table.string() << "\n";
  std::cout << "wrote " << report.files.significance.string() << "\n";
  std::cout << "wrote " << report.files.bar_data.string() << "\n";
  if (report.files.bar_chart_svg) {
    std::cout << "wrote " << report.files.bar_chart_svg->string() << "\n";
  }
  if (report.degraded) {
    std::cout << "partial report: some statistics were not computable\n";
    return kExitPartial;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Load-forecasting toolkit: cloud-membership-normalized transformer "
               "fused with a standard one via swarm-optimized weights"};
  app.set_version_flag("--version", cmit::kVersion);
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "write synthetic daily-load CSV datasets");
  std::size_t clusters = 31;
  std::size_t days = 789;
  std::uint64_t gen_seed = 7;
  std::string gen_out = "data/synthetic";
  gen->add_option("--clusters", clusters, "number of datasets");
  gen->add_option("--days", days, "days per dataset");
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--out", gen_out, "output directory");

  // run
  auto* run = app.add_subcommand("run", "train, fuse and evaluate over datasets");
  std::string config_path;
  run->add_option("--config", config_path, "JSON run configuration")->required();
  std::optional<std::uint64_t> run_seed;
  std::optional<std::string> run_out;
  std::optional<std::size_t> run_workers;
  std::optional<std::string> run_norm;
  std::optional<std::string> run_pu;
  run->add_option("--seed", run_seed, "override config seed");
  run->add_option("--out", run_out, "override output directory");
  run->add_option("--workers", run_workers, "worker pool width (0 = cores)");
  run->add_option("--norm", run_norm, "layer|cloud|both");
  run->add_option("--position-update", run_pu, "paper|standard");

  // stats / report
  auto* stats = app.add_subcommand("stats", "statistics + tables for an eval table");
  std::string stats_table;
  std::string stats_out = "reports";
  stats->add_option("--table", stats_table, "eval table CSV")->required();
  stats->add_option("--out", stats_out, "output directory");

  auto* report = app.add_subcommand("report", "stats plus bar-chart figure data/SVG");
  std::string report_table;
  std::string report_out = "reports";
  report->add_option("--table", report_table, "eval table CSV")->required();
  report->add_option("--out", report_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitBadInput;
  }

  try {
    if (gen->parsed()) return cmd_generate(clusters, days, gen_seed, gen_out);
    if (run->parsed()) {
      return cmd_run(config_path, run_seed, run_out, run_workers, run_norm, run_pu);
    }
    if (stats->parsed()) return cmd_stats(stats_table, stats_out, /*with_svg=*/false);
    if (report->parsed()) return cmd_stats(report_table, report_out, /*with_svg=*/true);
  } catch (const cmit::ArgumentError& e) {
    cmit::log_error(e.what());
    return kExitBadInput;
  } catch (const cmit::ConfigError& e) {
    cmit::log_error(e.what());
    return kExitBadInput;
  } catch (const cmit::ParseError& e) {
    cmit::log_error(e.what());
    return kExitBadInput;
  } catch (const cmit::IoError& e) {
    cmit::log_error(e.what());
    return kExitBadInput;
  } catch (const std::exception& e) {
    cmit::log_error(e.what());
    return kExitPartial;
  }
  return kExitBadInput;
}
