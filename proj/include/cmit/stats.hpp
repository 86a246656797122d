#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace cmit {

/// Mean absolute percentage error, in percent. Truths must be strictly
/// positive; lengths equal and >= 1.
double mape(const std::vector<double>& truth, const std::vector<double>& pred);

/// Per-dataset, per-model MAPE matrix (percent).
struct EvalTable {
  std::vector<std::string> dataset_ids;
  std::vector<std::string> model_names;
  std::vector<std::vector<double>> values;  // [dataset][model]

  std::size_t n_datasets() const { return dataset_ids.size(); }
  std::size_t n_models() const { return model_names.size(); }
  std::vector<double> column(std::size_t j) const;
  std::vector<double> column_means() const;
  void validate() const;
};

/// CSV with optional '#' comment header lines; first data row is the header
/// "dataset,<model>,...".
EvalTable load_eval_table(const std::filesystem::path& path);
void save_eval_table(const EvalTable& table, const std::filesystem::path& path,
                     const std::vector<std::string>& comment_lines = {});

struct WinLoss {
  std::vector<std::size_t> wins;    // per model; ties all count as wins
  std::vector<std::size_t> losses;  // datasets - wins
};

WinLoss win_loss(const EvalTable& table);

struct FriedmanResult {
  std::vector<double> avg_ranks;  // per model, 1 = best
  double statistic = 0.0;         // tie-corrected chi-square
  double p_value = 0.0;           // upper tail, k-1 dof
};

/// Ranks models within each dataset (ascending metric, average ranks on ties)
/// and aggregates. Needs >= 2 models and >= 2 datasets.
FriedmanResult friedman(const EvalTable& table);

enum class ZeroPolicy { drop, pratt };

struct WilcoxonResult {
  double r_plus = 0.0;
  double r_minus = 0.0;
  std::size_t n_effective = 0;  // nonzero differences
  double z = 0.0;               // normal approximation, no continuity correction
  double p_one_sided = 0.0;     // upper tail
};

/// Paired signed-rank test on differences x - y. R+ collects ranks where
/// x > y. Zero differences are dropped by default (Pratt available). Needs
/// length >= 5 and at least one nonzero difference.
WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& x,
                                    const std::vector<double>& y,
                                    ZeroPolicy zeros = ZeroPolicy::drop);

/// Exact one-sided p-value P(R+ >= observed) by enumerating all sign
/// assignments; practical for n <= ~20. Oracle for the normal approximation.
double wilcoxon_exact_p_one_sided(const std::vector<double>& x,
                                  const std::vector<double>& y);

struct ReportFiles {
  std::filesystem::path mape_table;     // published-style layout with summary rows
  std::filesystem::path significance;   // pairwise signed-rank table + Friedman line
  std::filesystem::path bar_data;       // (dataset, model, mape) rows
  std::optional<std::filesystem::path> bar_chart_svg;
};

/// Renders the evaluation reports for a table into `out_dir`. Pairwise tests
/// compare every model against the last column. `with_svg` additionally emits
/// a grouped bar chart. Throws on I/O failure; statistical degeneracies (too
/// few datasets for Friedman) are reported inside the files and via the
/// `degraded` flag.
struct ReportResult {
  ReportFiles files;
  bool degraded = false;  // some statistic was not computable
};

ReportResult emit_report(const EvalTable& table, const std::filesystem::path& out_dir,
                         bool with_svg = false,
                         const std::vector<std::string>& provenance = {});

}  // namespace cmit
