#pragma once

#include <string>
#include <vector>

#include "sarfsl/eval/experiment.hpp"

namespace sarfsl::eval {

struct GroupDensity {
  std::string group;
  std::size_t count = 0;
  double mean = 0.0;
  std::vector<double> density;  // per bin; sum(density) * bin_width == 1
  std::vector<std::pair<double, double>> thresholds;  // (target TPR, beta)
};

struct DensityTable {
  int ways = 0;
  double lo = 0.0;  // 1 / ways
  double hi = 1.0;
  int bins = 0;
  std::vector<GroupDensity> groups;

  double bin_width() const { return (hi - lo) / bins; }
};

/// Histogram of each score set over a shared grid of `bins` equal bins on
/// [1/ways, 1]; scores outside fall into the edge bins. TPR markers are
/// computed per group with ood::tpr_threshold.
DensityTable export_score_densities(const std::vector<ood::ScoreSet>& score_sets, int bins, int ways,
                                    const std::vector<double>& tpr_targets = {0.8});

/// TSV: "#ways=..\tbins=.." line, "bin_lo\tbin_hi\t<groups...>" header, one
/// row per bin, then "#threshold\t<group>\t<target>\t<beta>" and
/// "#mean\t<group>\t<mean>" lines.
std::string format_density_table(const DensityTable& table);

/// Standalone SVG with one density curve per group and dashed vertical lines
/// at the threshold markers.
std::string render_density_svg(const DensityTable& table, const std::string& title = "");

/// Markdown grid: one row per method (and condition), one column per
/// (ways, shots) pair, cells "mean ± ci95".
std::string render_accuracy_table(const std::vector<AccuracySummary>& summaries);
/// One JSON object per summary.
std::string accuracy_jsonl(const std::vector<AccuracySummary>& summaries);

/// Markdown grid: one row per OOD set, one column per shot count, cells
/// "basic / oe" AUROC.
std::string render_ood_table(const std::vector<OODReport>& reports);
std::string ood_jsonl(const std::vector<OODReport>& reports);

}  // namespace sarfsl::eval
