#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cmit/data.hpp"
#include "cmit/forecaster.hpp"
#include "cmit/pso.hpp"
#include "cmit/stats.hpp"

namespace cmit {

struct SyntheticSpec {
  std::size_t clusters = 5;
  std::size_t days = 789;
  Date start = parse_date("2021-01-01");
};

enum class NormSelection { layer_only, cloud_only, both };

/// Declarative description of a full sweep: data sources, split, the two
/// forecaster variants, swarm settings, output location and the global seed.
struct RunConfig {
  RunConfig() { model_f2.norm = NormKind::cloud; }

  std::vector<std::filesystem::path> dataset_paths;
  std::optional<SyntheticSpec> synthetic;
  SplitSpec split = SplitSpec::default_spec();
  ModelConfig model_f1;  // the plain-normalization variant
  ModelConfig model_f2;  // the membership-normalization variant
  SwarmConfig swarm;
  NormSelection norms = NormSelection::both;
  std::filesystem::path out_dir = "out";
  std::uint64_t seed = 7;
  std::size_t workers = 0;  // 0 = hardware concurrency

  void validate() const;
};

/// JSON round-trip for configs; file loading applies defaults for absent keys.
RunConfig run_config_from_json_string(const std::string& text);
RunConfig run_config_from_file(const std::filesystem::path& path);
std::string run_config_to_json_string(const RunConfig& cfg);

/// FNV-1a 64 over the canonical JSON dump, as 16 hex chars.
std::string config_hash(const RunConfig& cfg);

struct DatasetOutcome {
  std::string id;
  bool ok = false;
  std::string error;                 // when !ok
  std::vector<double> test_mapes;    // per evaluated model, then fused (if both)
  double pso_objective = 0.0;        // fitting-set objective of the fused model
  std::vector<double> corner_objectives;  // single-model fitting-set objectives
};

struct RunResult {
  EvalTable table;  // rows for successful datasets only
  std::vector<DatasetOutcome> outcomes;
  std::size_t failures = 0;
  std::filesystem::path eval_table_path;
};

/// Executes the sweep: per dataset, trains the selected variants, fits
/// combination weights on validation predictions, evaluates on the test
/// split, and writes per-dataset artifacts plus the aggregate table and
/// reports. Dataset failures are recorded and do not abort the sweep.
RunResult run_pipeline(const RunConfig& cfg);

/// Writes `clusters` synthetic CSV datasets plus a manifest; returns paths.
std::vector<std::filesystem::path> generate_datasets(std::size_t clusters,
                                                     std::size_t days,
                                                     std::uint64_t seed,
                                                     const std::filesystem::path& out_dir);

}  // namespace cmit
