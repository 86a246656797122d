#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cmit/error.hpp"
#include "cmit/stats.hpp"

namespace cmit {

namespace {

std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
  if (!out) throw IoError("write failed for " + path.string());
}

std::string svg_bar_chart(const EvalTable& table) {
  const std::size_t nd = table.n_datasets();
  const std::size_t nm = table.n_models();
  const double width = std::max<double>(900.0, 30.0 * static_cast<double>(nd * nm));
  const double height = 420.0;
  const double ml = 60.0, mr = 20.0, mt = 40.0, mb = 70.0;
  const double plot_w = width - ml - mr;
  const double plot_h = height - mt - mb;

  double vmax = 0.0;
  for (const auto& row : table.values) {
    for (double v : row) vmax = std::max(vmax, v);
  }
  vmax = std::ceil(vmax / 10.0) * 10.0;
  if (vmax <= 0.0) vmax = 1.0;

  static const char* palette[] = {"#4878a8", "#e8a33d", "#58a866", "#b95554",
                                  "#9467bd", "#8c564b"};
  const double group_w = plot_w / static_cast<double>(nd);
  const double bar_w = group_w * 0.8 / static_cast<double>(nm);

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
    << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
    << "MAPE by dataset and model</text>\n";
  // y axis with gridlines
  for (int tick = 0; tick <= 5; ++tick) {
    const double val = vmax * tick / 5.0;
    const double y = mt + plot_h - plot_h * tick / 5.0;
    s << "<line x1=\"" << ml << "\" y1=\"" << y << "\" x2=\"" << width - mr << "\" y2=\""
      << y << "\" stroke=\"#dddddd\"/>\n";
    s << "<text x=\"" << ml - 6 << "\" y=\"" << y + 4
      << "\" text-anchor=\"end\" font-size=\"10\">" << fixed2(val) << "</text>\n";
  }
  for (std::size_t i = 0; i < nd; ++i) {
    const double gx = ml + group_w * static_cast<double>(i) + group_w * 0.1;
    for (std::size_t j = 0; j < nm; ++j) {
      const double v = table.values[i][j];
      const double h = plot_h * v / vmax;
      const double x = gx + bar_w * static_cast<double>(j);
      const double y = mt + plot_h - h;
      s << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << bar_w * 0.95
        << "\" height=\"" << h << "\" fill=\"" << palette[j % 6] << "\"/>\n";
    }
    s << "<text x=\"" << gx + group_w * 0.4 << "\" y=\"" << mt + plot_h + 14
      << "\" text-anchor=\"middle\" font-size=\"9\" transform=\"rotate(45 "
      << gx + group_w * 0.4 << " " << mt + plot_h + 14 << ")\">" << table.dataset_ids[i]
      << "</text>\n";
  }
  // legend
  double lx = ml;
  for (std::size_t j = 0; j < nm; ++j) {
    s << "<rect x=\"" << lx << "\" y=\"" << height - 24 << "\" width=\"12\" height=\"12\" fill=\""
      << palette[j % 6] << "\"/>\n";
    s << "<text x=\"" << lx + 16 << "\" y=\"" << height - 14 << "\" font-size=\"11\">"
      << table.model_names[j] << "</text>\n";
    lx += 16.0 + 8.0 * static_cast<double>(table.model_names[j].size()) + 24.0;
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace

ReportResult emit_report(const EvalTable& table, const std::filesystem::path& out_dir,
                         bool with_svg, const std::vector<std::string>& provenance) {
  table.validate();
  std::filesystem::create_directories(out_dir);
  ReportResult result;

  const std::size_t last = table.n_models() - 1;

  // Friedman may legitimately refuse (one dataset, one model): report partial.
  bool friedman_ok = false;
  FriedmanResult fr;
  try {
    fr = friedman(table);
    friedman_ok = true;
  } catch (const ArgumentError&) {
    result.degraded = true;
  }

  bool wl_ok = false;
  WinLoss wl;
  try {
    wl = win_loss(table);
    wl_ok = true;
  } catch (const ArgumentError&) {
    result.degraded = true;
  }

  // Pairwise tests of every model against the last column, indexed by model.
  std::vector<std::optional<WilcoxonResult>> pair_results(last);
  std::vector<std::string> pair_failures;
  auto pair_label = [&](std::size_t j) {
    return table.model_names[last] + " vs. " + table.model_names[j];
  };
  if (table.n_models() >= 2) {
    const auto ref = table.column(last);
    for (std::size_t j = 0; j < last; ++j) {
      try {
        pair_results[j] = wilcoxon_signed_rank(table.column(j), ref);
      } catch (const ArgumentError& e) {
        pair_failures.push_back(pair_label(j) + ": " + e.what());
        result.degraded = true;
      }
    }
  }

  // ---- published-style MAPE table ----
  {
    std::ostringstream s;
    for (const auto& p : provenance) s << "# " << p << '\n';
    s << "dataset";
    for (const auto& m : table.model_names) s << ',' << m;
    s << '\n';
    for (std::size_t i = 0; i < table.n_datasets(); ++i) {
      s << table.dataset_ids[i];
      for (double v : table.values[i]) s << ',' << fixed2(v);
      s << '\n';
    }
    s << "Mean-MAPE";
    for (double v : table.column_means()) s << ',' << fixed2(v);
    s << '\n';
    s << "Win/Loss";
    for (std::size_t j = 0; j < table.n_models(); ++j) {
      if (wl_ok) {
        s << ',' << wl.wins[j] << '/' << wl.losses[j];
      } else {
        s << ",n/a";
      }
    }
    s << '\n';
    s << "F-rank";
    for (std::size_t j = 0; j < table.n_models(); ++j) {
      if (friedman_ok) {
        s << ',' << fixed2(fr.avg_ranks[j]);
      } else {
        s << ",n/a";
      }
    }
    s << '\n';
    s << "p-value";
    for (std::size_t j = 0; j < table.n_models(); ++j) {
      if (j == last) {
        s << ",\\";
      } else {
        s << ',' << (pair_results[j] ? sci(pair_results[j]->p_one_sided) : std::string("n/a"));
      }
    }
    s << '\n';
    result.files.mape_table = out_dir / "table_mape.csv";
    write_file(result.files.mape_table, s.str());
  }

  // ---- pairwise significance + Friedman ----
  {
    std::ostringstream s;
    for (const auto& p : provenance) s << "# " << p << '\n';
    s << "comparison,r_plus,r_minus,n_effective,z,p_one_sided\n";
    for (std::size_t j = 0; j < last; ++j) {
      if (!pair_results[j]) continue;
      const auto& r = *pair_results[j];
      s << pair_label(j) << ',' << sci(r.r_plus) << ',' << sci(r.r_minus) << ','
        << r.n_effective << ',' << sci(r.z) << ',' << sci(r.p_one_sided) << '\n';
    }
    for (const auto& f : pair_failures) s << "# not computed: " << f << '\n';
    if (friedman_ok) {
      s << "# friedman: statistic=" << sci(fr.statistic) << " p=" << sci(fr.p_value)
        << " avg_ranks=";
      for (std::size_t j = 0; j < fr.avg_ranks.size(); ++j) {
        s << (j ? "/" : "") << fixed2(fr.avg_ranks[j]);
      }
      s << '\n';
    } else {
      s << "# friedman: not computed (needs >= 2 datasets and >= 2 models)\n";
    }
    result.files.significance = out_dir / "table_significance.csv";
    write_file(result.files.significance, s.str());
  }

  // ---- grouped bar data ----
  {
    std::ostringstream s;
    s << "dataset,model,mape\n";
    for (std::size_t i = 0; i < table.n_datasets(); ++i) {
      for (std::size_t j = 0; j < table.n_models(); ++j) {
        s << table.dataset_ids[i] << ',' << table.model_names[j] << ','
          << fixed2(table.values[i][j]) << '\n';
      }
    }
    result.files.bar_data = out_dir / "fig_bars.csv";
    write_file(result.files.bar_data, s.str());
  }

  if (with_svg) {
    result.files.bar_chart_svg = out_dir / "fig_bars.svg";
    write_file(*result.files.bar_chart_svg, svg_bar_chart(table));
  }

  return result;
}

}  // namespace cmit
