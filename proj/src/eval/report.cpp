#include "sarfsl/eval/report.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "sarfsl/core/io.hpp"

namespace sarfsl::eval {

DensityTable export_score_densities(const std::vector<ood::ScoreSet>& score_sets, int bins, int ways,
                                    const std::vector<double>& tpr_targets) {
  require(!score_sets.empty(), ErrorKind::kEmptyScores, "density export: no score sets");
  require(bins >= 1, ErrorKind::kParameter, "density export: bins must be >= 1");
  require(ways >= 2, ErrorKind::kParameter, "density export: ways must be >= 2");
  DensityTable t;
  t.ways = ways;
  t.lo = 1.0 / ways;
  t.hi = 1.0;
  t.bins = bins;
  const double width = t.bin_width();
  for (const ood::ScoreSet& set : score_sets) {
    require(!set.scores.empty(), ErrorKind::kEmptyScores, "density export: group '" + set.group + "' is empty");
    GroupDensity g;
    g.group = set.group;
    g.count = set.scores.size();
    std::vector<std::size_t> counts(static_cast<std::size_t>(bins), 0);
    for (double s : set.scores) {
      const double pos = std::floor((s - t.lo) / width);
      const int b = static_cast<int>(std::clamp(pos, 0.0, static_cast<double>(bins - 1)));
      ++counts[static_cast<std::size_t>(b)];
    }
    const double n = static_cast<double>(g.count);
    for (std::size_t c : counts) g.density.push_back(static_cast<double>(c) / (n * width));
    g.mean = std::accumulate(set.scores.begin(), set.scores.end(), 0.0) / n;
    for (double target : tpr_targets) g.thresholds.emplace_back(target, ood::tpr_threshold(set.scores, target));
    t.groups.push_back(std::move(g));
  }
  return t;
}

std::string format_density_table(const DensityTable& t) {
  std::ostringstream out;
  out << "#ways=" << t.ways << "\tbins=" << t.bins << "\n" << "bin_lo\tbin_hi";
  for (const GroupDensity& g : t.groups) out << '\t' << g.group;
  out << '\n';
  const double width = t.bin_width();
  for (int b = 0; b < t.bins; ++b) {
    out << format_real(t.lo + b * width) << '\t' << format_real(b + 1 == t.bins ? t.hi : t.lo + (b + 1) * width);
    for (const GroupDensity& g : t.groups) out << '\t' << format_real(g.density[static_cast<std::size_t>(b)]);
    out << '\n';
  }
  for (const GroupDensity& g : t.groups) {
    for (const auto& [target, beta] : g.thresholds) {
      out << "#threshold\t" << g.group << '\t' << format_real(target) << '\t' << format_real(beta) << '\n';
    }
  }
  for (const GroupDensity& g : t.groups) out << "#mean\t" << g.group << '\t' << format_real(g.mean) << '\n';
  return out.str();
}

std::string render_density_svg(const DensityTable& t, const std::string& title) {
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};
  const double w = 640, h = 400, left = 60, right = 170, top = 40, bottom = 50;
  const double pw = w - left - right;
  const double ph = h - top - bottom;
  double ymax = 0.0;
  for (const GroupDensity& g : t.groups) ymax = std::max(ymax, *std::max_element(g.density.begin(), g.density.end()));
  if (ymax <= 0.0) ymax = 1.0;
  const auto sx = [&](double x) { return left + (x - t.lo) / (t.hi - t.lo) * pw; };
  const auto sy = [&](double y) { return top + ph - y / (1.05 * ymax) * ph; };
  const auto num = [](double v) { return format_fixed(v, 2); };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!title.empty()) out << "<text x=\"" << left << "\" y=\"22\" font-size=\"14\">" << title << "</text>\n";
  out << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double x = t.lo + (t.hi - t.lo) * k / 4.0;
    out << "<text x=\"" << num(sx(x)) << "\" y=\"" << num(top + ph + 18) << "\" text-anchor=\"middle\">"
        << format_fixed(x, 2) << "</text>\n";
  }
  out << "<text x=\"" << num(left + pw / 2) << "\" y=\"" << num(h - 12) << "\" text-anchor=\"middle\">S_ID score</text>\n";
  out << "<text x=\"16\" y=\"" << num(top + ph / 2) << "\" transform=\"rotate(-90 16 " << num(top + ph / 2)
      << ")\" text-anchor=\"middle\">density</text>\n";
  const double width = t.bin_width();
  for (std::size_t gi = 0; gi < t.groups.size(); ++gi) {
    const GroupDensity& g = t.groups[gi];
    const char* color = kColors[gi % (sizeof(kColors) / sizeof(kColors[0]))];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (int b = 0; b < t.bins; ++b) {
      out << num(sx(t.lo + (b + 0.5) * width)) << ',' << num(sy(g.density[static_cast<std::size_t>(b)])) << ' ';
    }
    out << "\"/>\n";
    for (const auto& [target, beta] : g.thresholds) {
      out << "<line x1=\"" << num(sx(beta)) << "\" y1=\"" << top << "\" x2=\"" << num(sx(beta)) << "\" y2=\""
          << top + ph << "\" stroke=\"" << color << "\" stroke-dasharray=\"5,4\"><title>" << g.group << " TPR "
          << format_real(target, 4) << "</title></line>\n";
    }
    const double ly = top + 16 + 20.0 * static_cast<double>(gi);
    out << "<line x1=\"" << num(left + pw + 12) << "\" y1=\"" << num(ly) << "\" x2=\"" << num(left + pw + 36)
        << "\" y2=\"" << num(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << num(left + pw + 42) << "\" y=\"" << num(ly + 4) << "\">" << g.group << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

namespace {

std::string cell_key(int ways, int shots) { return std::to_string(ways) + "-way " + std::to_string(shots) + "-shot"; }

}  // namespace

std::string render_accuracy_table(const std::vector<AccuracySummary>& summaries) {
  std::vector<std::pair<int, int>> columns;
  std::vector<std::string> rows;
  std::map<std::pair<std::string, std::pair<int, int>>, const AccuracySummary*> cells;
  for (const AccuracySummary& s : summaries) {
    const std::pair<int, int> col{s.ways, s.shots};
    if (std::find(columns.begin(), columns.end(), col) == columns.end()) columns.push_back(col);
    const std::string row = s.method + " (" + (s.condition.empty() ? "any" : s.condition) + ")";
    if (std::find(rows.begin(), rows.end(), row) == rows.end()) rows.push_back(row);
    cells[{row, col}] = &s;
  }
  std::sort(columns.begin(), columns.end());
  std::ostringstream out;
  out << "| method |";
  for (const auto& [w, n] : columns) out << ' ' << cell_key(w, n) << " |";
  out << "\n|---|";
  for (std::size_t i = 0; i < columns.size(); ++i) out << "---|";
  out << '\n';
  for (const std::string& row : rows) {
    out << "| " << row << " |";
    for (const auto& col : columns) {
      auto it = cells.find({row, col});
      if (it == cells.end()) {
        out << " - |";
      } else {
        out << ' ' << format_fixed(it->second->mean_accuracy, 1) << " ± " << format_fixed(it->second->ci95_halfwidth, 1)
            << " |";
      }
    }
    out << '\n';
  }
  return out.str();
}

std::string accuracy_jsonl(const std::vector<AccuracySummary>& summaries) {
  std::ostringstream out;
  for (const AccuracySummary& s : summaries) {
    out << "{\"method\":" << Json(s.method).dump() << ",\"condition\":" << Json(s.condition).dump()
        << ",\"ways\":" << s.ways << ",\"shots\":" << s.shots << ",\"num_runs\":" << s.num_runs
        << ",\"mean_accuracy\":" << format_real(s.mean_accuracy) << ",\"ci95_halfwidth\":" << format_real(s.ci95_halfwidth)
        << "}\n";
  }
  return out.str();
}

std::string render_ood_table(const std::vector<OODReport>& reports) {
  std::vector<std::string> sets;
  for (const OODReport& r : reports) {
    for (const OODRow& row : r.rows) {
      if (std::find(sets.begin(), sets.end(), row.set) == sets.end()) sets.push_back(row.set);
    }
  }
  std::ostringstream out;
  out << "| OOD set |";
  for (const OODReport& r : reports) out << ' ' << cell_key(r.ways, r.shots) << " (basic / OE) |";
  out << "\n|---|";
  for (std::size_t i = 0; i < reports.size(); ++i) out << "---|";
  out << '\n';
  for (const std::string& set : sets) {
    out << "| " << set << " |";
    for (const OODReport& r : reports) {
      auto it = std::find_if(r.rows.begin(), r.rows.end(), [&](const OODRow& row) { return row.set == set; });
      if (it == r.rows.end()) {
        out << " - |";
      } else {
        out << ' ' << format_fixed(it->basic, 1) << " / " << format_fixed(it->oe, 1) << " |";
      }
    }
    out << '\n';
  }
  out << "| ID accuracy |";
  for (const OODReport& r : reports) {
    out << ' ' << format_fixed(r.basic_accuracy, 1) << " / " << format_fixed(r.oe_accuracy, 1) << " |";
  }
  out << '\n';
  return out.str();
}

std::string ood_jsonl(const std::vector<OODReport>& reports) {
  std::ostringstream out;
  for (const OODReport& r : reports) {
    for (const OODRow& row : r.rows) {
      out << "{\"set\":" << Json(row.set).dump() << ",\"ways\":" << r.ways << ",\"shots\":" << r.shots
          << ",\"num_runs\":" << r.num_runs << ",\"auroc_basic\":" << format_real(row.basic)
          << ",\"auroc_oe\":" << format_real(row.oe) << "}\n";
    }
    out << "{\"set\":\"ID-accuracy\",\"ways\":" << r.ways << ",\"shots\":" << r.shots << ",\"num_runs\":" << r.num_runs
        << ",\"accuracy_basic\":" << format_real(r.basic_accuracy) << ",\"accuracy_oe\":" << format_real(r.oe_accuracy)
        << "}\n";
  }
  return out.str();
}

}  // namespace sarfsl::eval
