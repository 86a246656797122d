#include "cmit/stats.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <unordered_set>

#include <boost/math/distributions/chi_squared.hpp>

#include "cmit/error.hpp"

namespace cmit {

double mape(const std::vector<double>& truth, const std::vector<double>& pred) {
  if (truth.empty() || truth.size() != pred.size()) {
    throw ArgumentError("mape: inputs must be equal-length and non-empty");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (!std::isfinite(truth[i]) || !std::isfinite(pred[i])) {
      throw ArgumentError("mape: non-finite value at index " + std::to_string(i));
    }
    if (truth[i] <= 0.0) {
      throw ArgumentError("mape: nonpositive truth at index " + std::to_string(i));
    }
    acc += std::abs(pred[i] - truth[i]) / truth[i];
  }
  return 100.0 * acc / static_cast<double>(truth.size());
}

std::vector<double> EvalTable::column(std::size_t j) const {
  std::vector<double> out(n_datasets());
  for (std::size_t i = 0; i < n_datasets(); ++i) out[i] = values[i][j];
  return out;
}

std::vector<double> EvalTable::column_means() const {
  std::vector<double> out(n_models(), 0.0);
  for (const auto& row : values) {
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += row[j];
  }
  for (double& v : out) v /= static_cast<double>(n_datasets());
  return out;
}

void EvalTable::validate() const {
  if (model_names.empty()) throw ArgumentError("eval table: no models");
  if (dataset_ids.empty()) throw ArgumentError("eval table: no datasets");
  if (values.size() != dataset_ids.size()) {
    throw ArgumentError("eval table: row count does not match dataset ids");
  }
  std::unordered_set<std::string> seen;
  for (const auto& id : dataset_ids) {
    if (!seen.insert(id).second) throw ArgumentError("eval table: duplicate dataset id " + id);
  }
  for (const auto& row : values) {
    if (row.size() != model_names.size()) throw ArgumentError("eval table: ragged row");
    for (double v : row) {
      if (std::isnan(v)) throw ArgumentError("eval table: NaN entry");
    }
  }
}

EvalTable load_eval_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  EvalTable table;
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::size_t pos = 0;
    while (true) {
      const auto comma = s.find(',', pos);
      cells.push_back(s.substr(pos, comma - pos));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    return cells;
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto cells = split(line);
    if (!header_seen) {
      if (cells.size() < 2 || cells[0] != "dataset") {
        throw ParseError(path.string() + ":" + std::to_string(lineno) +
                         ": expected header 'dataset,<model>,...'");
      }
      table.model_names.assign(cells.begin() + 1, cells.end());
      header_seen = true;
      continue;
    }
    if (cells.size() != table.model_names.size() + 1) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                       std::to_string(table.model_names.size() + 1) + " cells");
    }
    std::vector<double> row(table.model_names.size());
    for (std::size_t j = 0; j < row.size(); ++j) {
      const std::string& cell = cells[j + 1];
      const char* b = cell.c_str();
      auto [p, ec] = std::from_chars(b, b + cell.size(), row[j]);
      if (ec != std::errc() || p != b + cell.size()) {
        throw ParseError(path.string() + ":" + std::to_string(lineno) +
                         ": malformed value '" + cell + "'");
      }
    }
    table.dataset_ids.push_back(cells[0]);
    table.values.push_back(std::move(row));
  }
  if (!header_seen) throw ParseError(path.string() + ": empty table");
  table.validate();
  return table;
}

void save_eval_table(const EvalTable& table, const std::filesystem::path& path,
                     const std::vector<std::string>& comment_lines) {
  table.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& c : comment_lines) out << "# " << c << '\n';
  out << "dataset";
  for (const auto& m : table.model_names) out << ',' << m;
  out << '\n';
  char buf[64];
  for (std::size_t i = 0; i < table.n_datasets(); ++i) {
    out << table.dataset_ids[i];
    for (double v : table.values[i]) {
      auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
      out << ',' << std::string_view(buf, end - buf);
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

WinLoss win_loss(const EvalTable& table) {
  table.validate();
  if (table.n_models() < 2) throw ArgumentError("win_loss: need at least 2 models");
  WinLoss wl;
  wl.wins.assign(table.n_models(), 0);
  wl.losses.assign(table.n_models(), 0);
  for (const auto& row : table.values) {
    const double best = *std::min_element(row.begin(), row.end());
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (row[j] == best) ++wl.wins[j];
    }
  }
  for (std::size_t j = 0; j < wl.wins.size(); ++j) {
    wl.losses[j] = table.n_datasets() - wl.wins[j];
  }
  return wl;
}

namespace {

/// Ascending average ranks (1-based); exact-equality ties share the mean rank.
std::vector<double> average_ranks(const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return v[a] < v[b];
  });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;  // mean of ranks i+1..j+1
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = avg;
    i = j + 1;
  }
  return ranks;
}

double chi_squared_upper_tail(double statistic, double dof) {
  const boost::math::chi_squared dist(dof);
  return boost::math::cdf(boost::math::complement(dist, statistic));
}

double normal_upper_tail(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

}  // namespace

FriedmanResult friedman(const EvalTable& table) {
  table.validate();
  const std::size_t k = table.n_models();
  const std::size_t n = table.n_datasets();
  if (k < 2) throw ArgumentError("friedman: need at least 2 models");
  if (n < 2) throw ArgumentError("friedman: need at least 2 datasets");

  FriedmanResult res;
  res.avg_ranks.assign(k, 0.0);
  double tie_sum = 0.0;  // sum over rows of sum(t^3 - t)
  double rank_sq_sum = 0.0;
  std::vector<double> rank_sums(k, 0.0);
  for (const auto& row : table.values) {
    const auto ranks = average_ranks(row);
    for (std::size_t j = 0; j < k; ++j) rank_sums[j] += ranks[j];
    // count tie group sizes by exact value
    std::vector<double> sorted(row);
    std::sort(sorted.begin(), sorted.end());
    std::size_t i = 0;
    while (i < k) {
      std::size_t j = i;
      while (j + 1 < k && sorted[j + 1] == sorted[i]) ++j;
      const double t = static_cast<double>(j - i + 1);
      tie_sum += t * t * t - t;
      i = j + 1;
    }
  }
  for (std::size_t j = 0; j < k; ++j) {
    res.avg_ranks[j] = rank_sums[j] / static_cast<double>(n);
    rank_sq_sum += rank_sums[j] * rank_sums[j];
  }
  const double kd = static_cast<double>(k);
  const double nd = static_cast<double>(n);
  const double correction = 1.0 - tie_sum / (kd * (kd * kd - 1.0) * nd);
  if (correction <= 0.0) {
    // every row fully tied: no information
    throw ArgumentError("friedman: all rows are complete ties");
  }
  res.statistic =
      (12.0 / (kd * nd * (kd + 1.0)) * rank_sq_sum - 3.0 * nd * (kd + 1.0)) / correction;
  res.p_value = chi_squared_upper_tail(res.statistic, kd - 1.0);
  return res;
}

WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& x,
                                    const std::vector<double>& y, ZeroPolicy zeros) {
  if (x.size() != y.size()) throw ArgumentError("wilcoxon: length mismatch");
  if (x.size() < 5) throw ArgumentError("wilcoxon: need at least 5 pairs");
  std::vector<double> diffs(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) {
      throw ArgumentError("wilcoxon: non-finite input");
    }
    diffs[i] = x[i] - y[i];
  }

  WilcoxonResult res;
  if (zeros == ZeroPolicy::drop) {
    std::vector<double> nz;
    for (double d : diffs) {
      if (d != 0.0) nz.push_back(d);
    }
    if (nz.empty()) throw ArgumentError("wilcoxon: all differences are zero");
    std::vector<double> abs_d(nz.size());
    for (std::size_t i = 0; i < nz.size(); ++i) abs_d[i] = std::abs(nz[i]);
    const auto ranks = average_ranks(abs_d);
    for (std::size_t i = 0; i < nz.size(); ++i) {
      (nz[i] > 0 ? res.r_plus : res.r_minus) += ranks[i];
    }
    res.n_effective = nz.size();
    const double n = static_cast<double>(res.n_effective);
    const double mean = n * (n + 1.0) / 4.0;
    const double sd = std::sqrt(n * (n + 1.0) * (2.0 * n + 1.0) / 24.0);
    res.z = (std::max(res.r_plus, res.r_minus) - mean) / sd;
  } else {
    // Pratt: rank zeros too, then exclude their ranks from both sums and
    // correct the moments for the zero block.
    std::vector<double> abs_d(diffs.size());
    for (std::size_t i = 0; i < diffs.size(); ++i) abs_d[i] = std::abs(diffs[i]);
    const auto ranks = average_ranks(abs_d);
    std::size_t n_zero = 0;
    for (std::size_t i = 0; i < diffs.size(); ++i) {
      if (diffs[i] > 0) {
        res.r_plus += ranks[i];
      } else if (diffs[i] < 0) {
        res.r_minus += ranks[i];
      } else {
        ++n_zero;
      }
    }
    if (n_zero == diffs.size()) throw ArgumentError("wilcoxon: all differences are zero");
    res.n_effective = diffs.size() - n_zero;
    const double n = static_cast<double>(diffs.size());
    const double n0 = static_cast<double>(n_zero);
    const double mean = (n * (n + 1.0) - n0 * (n0 + 1.0)) / 4.0;
    const double var =
        (n * (n + 1.0) * (2.0 * n + 1.0) - n0 * (n0 + 1.0) * (2.0 * n0 + 1.0)) / 24.0;
    res.z = (std::max(res.r_plus, res.r_minus) - mean) / std::sqrt(var);
  }
  res.p_one_sided = normal_upper_tail(res.z);
  return res;
}

double wilcoxon_exact_p_one_sided(const std::vector<double>& x,
                                  const std::vector<double>& y) {
  if (x.size() != y.size()) throw ArgumentError("wilcoxon exact: length mismatch");
  std::vector<double> nz;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    if (d != 0.0) nz.push_back(d);
  }
  if (nz.empty()) throw ArgumentError("wilcoxon exact: all differences are zero");
  if (nz.size() > 20) throw ArgumentError("wilcoxon exact: too many pairs for enumeration");
  std::vector<double> abs_d(nz.size());
  for (std::size_t i = 0; i < nz.size(); ++i) abs_d[i] = std::abs(nz[i]);
  const auto ranks = average_ranks(abs_d);
  double observed = 0.0;
  for (std::size_t i = 0; i < nz.size(); ++i) {
    if (nz[i] > 0) observed += ranks[i];
  }
  const std::size_t n = nz.size();
  const std::uint64_t total = std::uint64_t{1} << n;
  std::uint64_t at_least = 0;
  for (std::uint64_t mask = 0; mask < total; ++mask) {
    double rp = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask & (std::uint64_t{1} << i)) rp += ranks[i];
    }
    if (rp >= observed - 1e-12) ++at_least;
  }
  return static_cast<double>(at_least) / static_cast<double>(total);
}

}  // namespace cmit
