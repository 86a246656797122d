#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace cmit {

using Date = std::chrono::sys_days;

/// Parses strict ISO-8601 "YYYY-MM-DD"; throws ParseError otherwise.
Date parse_date(const std::string& s);
std::string format_date(Date d);

/// Inclusive calendar interval.
struct DateRange {
  Date first;
  Date last;

  bool contains(Date d) const { return d >= first && d <= last; }
  long days() const { return (last - first).count() + 1; }
};

/// Daily series of strictly positive loads on contiguous dates.
struct TimeSeriesDataset {
  std::string id;
  Date start{};
  std::vector<double> loads;

  std::size_t size() const { return loads.size(); }
  Date date_at(std::size_t i) const { return start + std::chrono::days(static_cast<long>(i)); }
  Date last_date() const { return date_at(loads.size() - 1); }
  /// Index of a date within the series, if covered.
  std::optional<std::size_t> index_of(Date d) const;

  void validate() const;  // throws ArgumentError on violated invariants
};

/// Chronological partition; train may be a union of ranges.
struct SplitSpec {
  std::vector<DateRange> train;
  DateRange validation;
  DateRange test;

  /// Mirrors the reference protocol: train 2021 + Mar..Dec 2022,
  /// validation Jan..Feb 2022, test Jan..Feb 2023.
  static SplitSpec default_spec();
};

struct SplitResult {
  std::vector<DateRange> train;
  DateRange validation;
  DateRange test;
  std::size_t train_days = 0;
  std::size_t validation_days = 0;
  std::size_t test_days = 0;
};

/// Validates the spec against the dataset (ranges in span, disjoint, covering)
/// and reports per-split day counts.
SplitResult split_dataset(const TimeSeriesDataset& ds, const SplitSpec& spec);

/// z-score scaling constants fitted on the training split only.
struct Scaler {
  double mean = 0.0;
  double scale = 1.0;  // > 0 (floored)

  static Scaler fit(const std::vector<double>& values);
  double transform(double v) const { return (v - mean) / scale; }
  double inverse(double v) const { return v * scale + mean; }
};

/// Supervised sliding windows: p standardized inputs preceding each target.
struct WindowedDataset {
  std::size_t lookback = 0;
  std::vector<std::vector<double>> inputs;  // [num_windows][p], standardized
  std::vector<double> targets;              // standardized
  std::vector<double> raw_targets;          // original units
  std::vector<Date> target_dates;

  std::size_t size() const { return targets.size(); }
};

/// Windows whose targets fall inside `target_ranges`. Context (the p inputs)
/// may reach backward across split boundaries; targets never leave their
/// ranges. Targets whose date lacks p preceding days in the dataset are
/// skipped.
WindowedDataset make_windows(const TimeSeriesDataset& ds,
                             const std::vector<DateRange>& target_ranges,
                             std::size_t lookback, const Scaler& scaler);

/// Windows over a whole contiguous series: size() == n - p.
WindowedDataset make_windows(const TimeSeriesDataset& ds, std::size_t lookback,
                             const Scaler& scaler);

/// Reads "date,load" CSV (ISO-8601 dates, strictly positive decimal loads).
/// Malformed rows, duplicate dates, gaps and nonpositive loads raise
/// ParseError with the offending line number.
TimeSeriesDataset load_csv(const std::filesystem::path& path);

/// Writes the same format back, bit-stably for identical data.
void save_csv(const TimeSeriesDataset& ds, const std::filesystem::path& path);

/// Parameters of one synthetic cluster: multiplicative annual and weekly
/// structure with lognormal noise and occasional positive spikes.
struct SyntheticProfile {
  double base = 1000.0;          // mean daily load, kWh
  double annual_amplitude = 0.2; // in [0, 1)
  double annual_phase = 0.0;
  double weekly[7] = {1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0};
  double noise_sigma = 0.05;
  double spike_prob = 0.01;
  double spike_scale = 0.3;      // spike magnitude relative to base

  void validate() const;
};

/// Deterministic profile for cluster `index` under a family seed.
SyntheticProfile default_profile(std::size_t index, std::uint64_t seed);

/// Generates n_days of strictly positive daily loads starting at `start`.
TimeSeriesDataset generate_synthetic(const SyntheticProfile& profile,
                                     std::size_t n_days, std::uint64_t seed,
                                     std::string id = "synthetic",
                                     Date start = parse_date("2021-01-01"));

inline constexpr std::size_t kMinSyntheticDays = 60;

}  // namespace cmit
