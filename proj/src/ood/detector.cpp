#include "sarfsl/ood/detector.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>

#include "sarfsl/core/io.hpp"

namespace sarfsl::ood {

void DetectorConfig::validate() const {
  require(temperature > 0.0, ErrorKind::kConfig, "detector.temperature must be positive");
}

Json to_json(const DetectorConfig& cfg) {
  Json j{{"temperature", cfg.temperature}};
  if (cfg.threshold) j["threshold"] = *cfg.threshold;
  return j;
}

DetectorConfig detector_config_from_json(const Json& j, const std::string& path) {
  DetectorConfig cfg;
  JsonReader r(j, path);
  r.get("temperature", cfg.temperature);
  if (r.has("threshold")) {
    double t = 0.0;
    r.get("threshold", t);
    cfg.threshold = t;
  }
  r.finish();
  return cfg;
}

double msp_score(const std::vector<double>& logits, double temperature) {
  require(temperature > 0.0, ErrorKind::kParameter, "msp_score: temperature must be positive");
  require(logits.size() >= 2, ErrorKind::kParameter, "msp_score: need at least two logits");
  const double zmax = *std::max_element(logits.begin(), logits.end());
  double denom = 0.0;
  for (double z : logits) denom += std::exp((z - zmax) / temperature);
  return 1.0 / denom;
}

std::vector<double> msp_scores(const ssl::FeatureMatrix& logits, double temperature) {
  std::vector<double> out(static_cast<std::size_t>(logits.rows()));
  std::vector<double> row(static_cast<std::size_t>(logits.cols()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    for (Eigen::Index k = 0; k < logits.cols(); ++k) row[static_cast<std::size_t>(k)] = logits(i, k);
    out[static_cast<std::size_t>(i)] = msp_score(row, temperature);
  }
  return out;
}

Decision decide(double score, double threshold) {
  return score >= threshold ? Decision::kAcceptId : Decision::kRejectOod;
}

double auroc(const std::vector<double>& id_scores, const std::vector<double>& ood_scores) {
  require(!id_scores.empty() && !ood_scores.empty(), ErrorKind::kMetric,
          "auroc: both score lists must be nonempty");
  std::vector<std::pair<double, bool>> all;  // (score, is_id)
  all.reserve(id_scores.size() + ood_scores.size());
  for (double s : id_scores) all.emplace_back(s, true);
  for (double s : ood_scores) all.emplace_back(s, false);
  for (const auto& [s, is_id] : all) {
    (void)is_id;
    require(!std::isnan(s), ErrorKind::kMetric, "auroc: NaN score");
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

  // Twice the Mann-Whitney count, kept integral so ties stay exact.
  std::uint64_t twice_wins = 0;
  std::uint64_t ood_below = 0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    std::uint64_t id_here = 0;
    std::uint64_t ood_here = 0;
    while (j < all.size() && all[j].first == all[i].first) {
      (all[j].second ? id_here : ood_here) += 1;
      ++j;
    }
    twice_wins += id_here * (2 * ood_below + ood_here);
    ood_below += ood_here;
    i = j;
  }
  const double credits = static_cast<double>(twice_wins) / 2.0;
  const double pairs = static_cast<double>(id_scores.size()) * static_cast<double>(ood_scores.size());
  return (credits / pairs) * 100.0;
}

double tpr_threshold(const std::vector<double>& id_scores, double target_tpr) {
  require(!id_scores.empty(), ErrorKind::kMetric, "tpr_threshold: empty score list");
  require(target_tpr > 0.0 && target_tpr <= 1.0, ErrorKind::kParameter,
          "tpr_threshold: target must lie in (0, 1]");
  std::vector<double> sorted = id_scores;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const std::size_t n = sorted.size();
  const auto frac = [n](std::size_t k) { return static_cast<double>(k) / static_cast<double>(n); };
  std::size_t k = std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil(target_tpr * n)), 1, n);
  while (k > 1 && frac(k - 1) >= target_tpr) --k;
  while (k < n && frac(k) < target_tpr) ++k;
  return sorted[k - 1];
}

std::vector<std::pair<double, double>> sweep_temperature(const ssl::FeatureMatrix& id_logits,
                                                         const ssl::FeatureMatrix& ood_logits,
                                                         const std::vector<double>& temperatures) {
  std::vector<std::pair<double, double>> out;
  for (double t : temperatures) {
    out.emplace_back(t, auroc(msp_scores(id_logits, t), msp_scores(ood_logits, t)));
  }
  return out;
}

std::string format_score_file(const std::vector<ScoreSet>& sets, int ways) {
  std::ostringstream out;
  out << "#ways=" << ways << "\n" << "group\tscore\n";
  for (const ScoreSet& set : sets) {
    require(!set.group.empty() && set.group.find_first_of("\t\n") == std::string::npos, ErrorKind::kParameter,
            "score group names must be nonempty and free of tabs/newlines");
    for (double s : set.scores) out << set.group << '\t' << format_real(s) << '\n';
  }
  return out.str();
}

void write_score_file(const std::filesystem::path& path, const std::vector<ScoreSet>& sets, int ways) {
  write_file_atomic(path, format_score_file(sets, ways));
}

ScoreFile read_score_file(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  std::istringstream in(text);
  ScoreFile file;
  std::string line;
  bool header_seen = false;
  std::size_t line_no = 0;
  std::size_t records = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line.rfind("#ways=", 0) == 0) {
        try {
          file.ways = std::stoi(line.substr(6));
        } catch (const std::exception&) {
          fail(ErrorKind::kSchema, path.string() + ":" + std::to_string(line_no) + ": bad #ways line");
        }
      }
      continue;
    }
    if (!header_seen) {
      require(line == "group\tscore", ErrorKind::kSchema,
              path.string() + ": expected header 'group<TAB>score'");
      header_seen = true;
      continue;
    }
    const auto tab = line.find('\t');
    require(tab != std::string::npos && tab > 0, ErrorKind::kSchema,
            path.string() + ":" + std::to_string(line_no) + ": expected group<TAB>score");
    const std::string group = line.substr(0, tab);
    double score = 0.0;
    try {
      std::size_t used = 0;
      score = std::stod(line.substr(tab + 1), &used);
      require(used == line.size() - tab - 1, ErrorKind::kSchema, "trailing characters");
    } catch (const std::exception&) {
      fail(ErrorKind::kSchema, path.string() + ":" + std::to_string(line_no) + ": score is not a number");
    }
    auto it = std::find_if(file.sets.begin(), file.sets.end(), [&](const ScoreSet& s) { return s.group == group; });
    if (it == file.sets.end()) {
      file.sets.push_back({group, {}});
      it = std::prev(file.sets.end());
    }
    it->scores.push_back(score);
    ++records;
  }
  require(records > 0, ErrorKind::kEmptyScores, path.string() + ": no score records");
  return file;
}

}  // namespace sarfsl::ood
