#include "cmit/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "cmit/error.hpp"
#include "cmit/rng.hpp"

namespace cmit {

namespace {

std::string double_to_string(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

}  // namespace

Date parse_date(const std::string& s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') {
    throw ParseError("invalid date '" + s + "': expected YYYY-MM-DD");
  }
  int y = 0, m = 0, d = 0;
  auto parse_int = [&](const char* b, const char* e, int& out) {
    auto [p, ec] = std::from_chars(b, e, out);
    return ec == std::errc() && p == e;
  };
  const char* c = s.c_str();
  if (!parse_int(c, c + 4, y) || !parse_int(c + 5, c + 7, m) || !parse_int(c + 8, c + 10, d)) {
    throw ParseError("invalid date '" + s + "': expected YYYY-MM-DD");
  }
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
                                        std::chrono::day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) {
    throw ParseError("invalid calendar date '" + s + "'");
  }
  return std::chrono::sys_days(ymd);
}

std::string format_date(Date d) {
  const std::chrono::year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

std::optional<std::size_t> TimeSeriesDataset::index_of(Date d) const {
  if (loads.empty() || d < start || d > last_date()) return std::nullopt;
  return static_cast<std::size_t>((d - start).count());
}

void TimeSeriesDataset::validate() const {
  if (loads.empty()) throw ArgumentError("dataset '" + id + "' is empty");
  for (std::size_t i = 0; i < loads.size(); ++i) {
    if (!std::isfinite(loads[i]) || loads[i] <= 0.0) {
      throw ArgumentError("dataset '" + id + "': nonpositive load at " +
                          format_date(date_at(i)));
    }
  }
}

SplitSpec SplitSpec::default_spec() {
  SplitSpec s;
  s.train = {{parse_date("2021-01-01"), parse_date("2021-12-31")},
             {parse_date("2022-03-01"), parse_date("2022-12-31")}};
  s.validation = {parse_date("2022-01-01"), parse_date("2022-02-28")};
  s.test = {parse_date("2023-01-01"), parse_date("2023-02-28")};
  return s;
}

SplitResult split_dataset(const TimeSeriesDataset& ds, const SplitSpec& spec) {
  ds.validate();
  std::vector<std::pair<DateRange, int>> ranges;  // 0 train, 1 val, 2 test
  for (const auto& r : spec.train) ranges.push_back({r, 0});
  ranges.push_back({spec.validation, 1});
  ranges.push_back({spec.test, 2});

  for (const auto& [r, kind] : ranges) {
    if (r.first > r.last) throw ConfigError("split range with first > last");
    if (!ds.index_of(r.first) || !ds.index_of(r.last)) {
      throw ConfigError("split range " + format_date(r.first) + ".." + format_date(r.last) +
                        " outside dataset span " + format_date(ds.start) + ".." +
                        format_date(ds.last_date()));
    }
  }
  for (std::size_t i = 0; i < ranges.size(); ++i) {
    for (std::size_t j = i + 1; j < ranges.size(); ++j) {
      if (ranges[i].first.first <= ranges[j].first.last &&
          ranges[j].first.first <= ranges[i].first.last) {
        throw ConfigError("split ranges overlap");
      }
    }
  }
  long covered = 0;
  for (const auto& [r, kind] : ranges) covered += r.days();
  if (static_cast<std::size_t>(covered) != ds.size()) {
    throw ConfigError("split ranges do not cover the dataset: " + std::to_string(covered) +
                      " of " + std::to_string(ds.size()) + " days");
  }

  SplitResult out;
  out.train = spec.train;
  out.validation = spec.validation;
  out.test = spec.test;
  for (const auto& r : spec.train) out.train_days += static_cast<std::size_t>(r.days());
  out.validation_days = static_cast<std::size_t>(spec.validation.days());
  out.test_days = static_cast<std::size_t>(spec.test.days());
  return out;
}

Scaler Scaler::fit(const std::vector<double>& values) {
  if (values.empty()) throw ArgumentError("scaler: no values to fit");
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - mean) * (v - mean);
  double sd = std::sqrt(sq / static_cast<double>(values.size()));
  if (sd <= 0.0) sd = 1e-8;  // constant series stays invertible
  return {mean, sd};
}

WindowedDataset make_windows(const TimeSeriesDataset& ds,
                             const std::vector<DateRange>& target_ranges,
                             std::size_t lookback, const Scaler& scaler) {
  if (lookback < 2) throw ArgumentError("make_windows: lookback must be >= 2");
  if (ds.size() <= lookback) {
    throw ArgumentError("make_windows: series shorter than lookback + 1");
  }
  WindowedDataset out;
  out.lookback = lookback;
  for (const auto& range : target_ranges) {
    for (Date d = range.first; d <= range.last; d += std::chrono::days(1)) {
      const auto idx = ds.index_of(d);
      if (!idx) continue;
      if (*idx < lookback) continue;  // not enough preceding context
      std::vector<double> w(lookback);
      for (std::size_t j = 0; j < lookback; ++j) {
        w[j] = scaler.transform(ds.loads[*idx - lookback + j]);
      }
      out.inputs.push_back(std::move(w));
      out.targets.push_back(scaler.transform(ds.loads[*idx]));
      out.raw_targets.push_back(ds.loads[*idx]);
      out.target_dates.push_back(d);
    }
  }
  return out;
}

WindowedDataset make_windows(const TimeSeriesDataset& ds, std::size_t lookback,
                             const Scaler& scaler) {
  return make_windows(ds, {{DateRange{ds.start, ds.last_date()}}}, lookback, scaler);
}

TimeSeriesDataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  TimeSeriesDataset ds;
  ds.id = path.stem().string();
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  bool have_prev = false;
  Date prev{};
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != "date,load") {
        throw ParseError(path.string() + ":" + std::to_string(lineno) +
                         ": expected header 'date,load'");
      }
      header_seen = true;
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": malformed row '" +
                       line + "'");
    }
    Date d;
    try {
      d = parse_date(line.substr(0, comma));
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    const std::string value = line.substr(comma + 1);
    double load = 0.0;
    const char* b = value.c_str();
    auto [p, ec] = std::from_chars(b, b + value.size(), load);
    if (ec != std::errc() || p != b + value.size() || !std::isfinite(load)) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) +
                       ": malformed load value '" + value + "'");
    }
    if (load <= 0.0) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) +
                       ": nonpositive load on " + format_date(d));
    }
    if (have_prev) {
      const long delta = (d - prev).count();
      if (delta == 0) {
        throw ParseError(path.string() + ":" + std::to_string(lineno) + ": duplicate date " +
                         format_date(d));
      }
      if (delta < 0) {
        throw ParseError(path.string() + ":" + std::to_string(lineno) +
                         ": dates not increasing at " + format_date(d));
      }
      if (delta > 1) {
        throw ParseError(path.string() + ":" + std::to_string(lineno) + ": gap before " +
                         format_date(d) + " (missing " + format_date(prev + std::chrono::days(1)) +
                         ")");
      }
    } else {
      ds.start = d;
    }
    ds.loads.push_back(load);
    prev = d;
    have_prev = true;
  }
  if (!header_seen) throw ParseError(path.string() + ": empty file");
  if (ds.loads.empty()) throw ParseError(path.string() + ": no data rows");
  return ds;
}

void save_csv(const TimeSeriesDataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "date,load\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out << format_date(ds.date_at(i)) << ',' << double_to_string(ds.loads[i]) << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

void SyntheticProfile::validate() const {
  if (base <= 0.0) throw ConfigError("synthetic profile: base must be positive");
  if (annual_amplitude < 0.0 || annual_amplitude >= 1.0) {
    throw ConfigError("synthetic profile: annual_amplitude must be in [0, 1)");
  }
  for (double w : weekly) {
    if (w <= 0.0) throw ConfigError("synthetic profile: weekly factors must be positive");
  }
  if (noise_sigma < 0.0 || spike_prob < 0.0 || spike_prob > 1.0 || spike_scale < 0.0) {
    throw ConfigError("synthetic profile: invalid noise/spike parameters");
  }
}

SyntheticProfile default_profile(std::size_t index, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x70726F66ULL + index));
  SyntheticProfile p;
  p.base = 500.0 * std::exp(rng.uniform01() * std::log(10.0));  // 500..5000, log-uniform
  p.annual_amplitude = 0.05 + 0.25 * rng.uniform01();
  p.annual_phase = 2.0 * std::numbers::pi * rng.uniform01();
  const double weekend_dip = 0.6 + 0.25 * rng.uniform01();
  for (int i = 0; i < 7; ++i) {
    const bool weekend = i >= 5;
    p.weekly[i] = (weekend ? weekend_dip : 1.0) * (1.0 + 0.03 * rng.normal01());
    p.weekly[i] = std::max(p.weekly[i], 0.1);
  }
  p.noise_sigma = 0.02 + 0.06 * rng.uniform01();
  p.spike_prob = 0.02 * rng.uniform01();
  p.spike_scale = 0.1 + 0.3 * rng.uniform01();
  return p;
}

TimeSeriesDataset generate_synthetic(const SyntheticProfile& profile, std::size_t n_days,
                                     std::uint64_t seed, std::string id, Date start) {
  profile.validate();
  if (n_days < kMinSyntheticDays) {
    throw ConfigError("generate_synthetic: need at least " +
                      std::to_string(kMinSyntheticDays) + " days, got " +
                      std::to_string(n_days));
  }
  Rng rng(seed);
  TimeSeriesDataset ds;
  ds.id = std::move(id);
  ds.start = start;
  ds.loads.resize(n_days);
  for (std::size_t t = 0; t < n_days; ++t) {
    const double annual =
        1.0 + profile.annual_amplitude *
                  std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / 365.25 +
                           profile.annual_phase);
    // weekday index anchored to the actual calendar day
    const auto wd = std::chrono::weekday(start + std::chrono::days(static_cast<long>(t)));
    const double weekly = profile.weekly[wd.iso_encoding() - 1];
    const double noise = std::exp(profile.noise_sigma * rng.normal01());
    double load = profile.base * annual * weekly * noise;
    if (rng.uniform01() < profile.spike_prob) {
      load += profile.base * profile.spike_scale * rng.uniform01();
    }
    ds.loads[t] = load;
  }
  ds.validate();
  return ds;
}

}  // namespace cmit
