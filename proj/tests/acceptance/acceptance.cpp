// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 when any
// criterion fails. Tolerances and desk-scale settings are fixed here.

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>

#include "criteria.hpp"
#include "sarfsl/cli/commands.hpp"
#include "sarfsl/core/io.hpp"
#include "sarfsl/data_io/synthetic.hpp"
#include "sarfsl/eval/experiment.hpp"
#include "sarfsl/eval/report.hpp"
#include "sarfsl/ssl/checkpoint.hpp"

namespace fs = std::filesystem;
using namespace sarfsl;
using criteria::CheckResult;

namespace {

// Pinned thresholds.
constexpr double kAccuracyMargin = 5.0;       // ssl+basic over the best scratch baseline
constexpr double kFakeDataMargin = 20.0;      // OE over basic AUROC on FakeData
constexpr double kHoldoutMargin = 2.0;        // OE over basic AUROC on Holdout
constexpr double kShotsTolerance = 2.0;       // allowed AUROC drop between shot counts
constexpr double kDensityTolerance = 1e-6;    // per-group density mass error
constexpr int kAccuracyRuns = 50;
constexpr int kOodRuns = 50;

struct Report {
  int failures = 0;
  std::ostringstream log;

  void line(int id, const std::string& name, const CheckResult& r, double seconds) {
    std::ostringstream s;
    s << "criterion " << id << ' ' << (r.pass ? "PASS" : "FAIL") << ' ' << name << ": " << r.detail << " ("
      << format_fixed(seconds, 1) << "s)";
    std::cout << s.str() << std::endl;
    log << s.str() << '\n';
    failures += !r.pass;
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

template <typename F>
void timed(Report& rep, int id, const std::string& name, F&& check) {
  const auto t0 = std::chrono::steady_clock::now();
  CheckResult r;
  try {
    r = check();
  } catch (const std::exception& e) {
    r.fail(std::string("threw: ") + e.what());
  }
  rep.line(id, name, r, seconds_since(t0));
}

// Desk-scale pools, encoder and head settings shared by criteria 6-9.
struct Desk {
  DatasetPool task;        // 10 classes: SOC-train / SOC-test plus EOC-test
  DatasetPool pretrain;    // unlabeled, different class templates
  DatasetPool disjoint;    // unlabeled, other templates and heavier clutter
  DatasetPool fake;
  ssl::Encoder encoder;
  fsl::FSLTrainConfig head;
  fsl::FSLTrainConfig scratch;
  eval::FeatureBank bank;
  ssl::FeatureMatrix pretrain_features, disjoint_features, fake_features;
  std::uint64_t master_seed = 5;

  eval::Context ctx() const { return {&task, &encoder, &bank, &pretrain, &pretrain_features}; }
};

SyntheticSpec desk_spec(int classes, int per_class, std::uint64_t templates) {
  SyntheticSpec s;
  s.num_classes = classes;
  s.chips_per_class = per_class;
  s.template_seed = templates;
  return s;
}

Desk build_desk(const fs::path& work, std::ostream& log) {
  Desk d;
  SyntheticSpec eoc = desk_spec(10, 30, 1);
  eoc.condition_shift = 0.5;
  d.task = concat_pools({generate_synthetic_pool(desk_spec(10, 60, 1), 11), generate_synthetic_pool(eoc, 12)});
  // 10 classes x 200 chips from two template families under different clutter.
  SyntheticSpec heavy = desk_spec(5, 200, 2001);
  heavy.background_level = 0.2;
  d.pretrain = strip_labels(
      concat_pools({generate_synthetic_pool(desk_spec(5, 200, 1001), 13), generate_synthetic_pool(heavy, 23)}));
  SyntheticSpec dis = desk_spec(10, 30, 5001);
  dis.background_level = 0.15;
  d.disjoint = strip_labels(generate_synthetic_pool(dis, 14));
  d.fake = make_fake_data(300, 32, 15);

  ssl::SSLConfig ssl;
  ssl.epochs = 60;
  ssl.batch_size = 128;
  ssl.learning_rate = 1e-3;
  const augment::AugmentationConfig aug;
  const auto t0 = std::chrono::steady_clock::now();
  const ssl::PretrainResult pre = ssl::pretrain(d.pretrain, aug, ssl);
  d.encoder = pre.encoder;
  ssl::save_encoder_checkpoint(work / "desk_encoder.ckpt", d.encoder, ssl, aug.hash());
  write_file_atomic(work / "desk_encoder.train_log.jsonl", ssl::training_log_jsonl(pre.log));
  log << "pretrain: " << ssl.epochs << " epochs, loss " << format_fixed(pre.log.front().mean_loss, 3) << " -> "
      << format_fixed(pre.log.back().mean_loss, 3) << " (" << format_fixed(seconds_since(t0), 1) << "s)\n";

  d.head.l2_normalize = true;
  d.scratch = d.head;
  d.scratch.iterations = 300;
  d.bank = eval::build_feature_bank(d.encoder, d.task, d.head.feature_views, d.head.stage2_noise_std,
                                    d.head.flip_prob, eval::feature_bank_seed(d.master_seed));
  d.pretrain_features = ssl::extract_features(d.encoder, d.pretrain.chips);
  d.disjoint_features = ssl::extract_features(d.encoder, d.disjoint.chips);
  d.fake_features = ssl::extract_features(d.encoder, d.fake.chips);
  return d;
}

CheckResult check_accuracy_margin(const Desk& d, std::ostream& log) {
  eval::RunOptions o;
  o.num_runs = kAccuracyRuns;
  o.master_seed = d.master_seed;
  std::vector<eval::AccuracySummary> all;
  for (eval::Method m : {eval::Method::kScratchSmall, eval::Method::kScratchDeep, eval::Method::kSslBasic}) {
    all.push_back(eval::run_accuracy_experiment(d.ctx(), m, 5, 5, o, d.head, d.scratch));
  }
  log << eval::render_accuracy_table(all);
  const double best_scratch = std::max(all[0].mean_accuracy, all[1].mean_accuracy);
  const double margin = all[2].mean_accuracy - best_scratch;
  CheckResult r;
  std::ostringstream s;
  s << "ssl+basic " << format_fixed(all[2].mean_accuracy, 2) << " vs best scratch " << format_fixed(best_scratch, 2)
    << ", margin " << format_fixed(margin, 2) << " (need >= " << kAccuracyMargin << ")";
  r.detail = s.str();
  if (!(margin >= kAccuracyMargin)) r.pass = false;
  return r;
}

std::vector<eval::OODReport> run_ood_grid(const Desk& d, std::ostream& log) {
  const std::vector<eval::OODSet> sets{{"DisjointSynthetic", &d.disjoint, &d.disjoint_features},
                                       {cli::kFakeDataSet, &d.fake, &d.fake_features}};
  std::vector<eval::OODReport> reports;
  for (int shots : {1, 5, 25}) {
    eval::OODOptions o;
    o.runs.num_runs = kOodRuns;
    o.runs.master_seed = d.master_seed;
    o.holdout_count = 3;
    o.collect_scores = shots == 5;
    o.eoc_condition = tags::kEocTest;
    reports.push_back(eval::run_ood_experiment(d.ctx(), sets, 7, shots, o, d.head));
  }
  log << eval::render_ood_table(reports);
  return reports;
}

CheckResult check_oe_beats_basic(const eval::OODReport& five_shot) {
  CheckResult r;
  std::ostringstream s;
  for (const eval::OODRow& row : five_shot.rows) {
    const double margin = row.oe - row.basic;
    const double need = row.set == eval::kHoldoutSet ? kHoldoutMargin : row.set == cli::kFakeDataSet ? kFakeDataMargin : 0.0;
    s << row.set << ' ' << format_fixed(row.basic, 1) << "->" << format_fixed(row.oe, 1) << "; ";
    const bool ok = need > 0.0 ? margin >= need : margin > 0.0;
    if (!ok) r.fail(row.set + " margin " + format_fixed(margin, 2));
  }
  if (r.pass) r.detail = s.str();
  else r.detail += " | " + s.str();
  return r;
}

CheckResult check_shots_trend(const std::vector<eval::OODReport>& reports) {
  CheckResult r;
  std::ostringstream s;
  s << "OE holdout AUROC";
  double previous = -1.0;
  for (const eval::OODReport& rep : reports) {
    const double v = rep.rows.front().oe;
    s << ' ' << rep.shots << "-shot " << format_fixed(v, 2);
    if (previous >= 0.0 && v < previous - kShotsTolerance) r.fail("AUROC drops at " + std::to_string(rep.shots) + " shots");
    previous = v;
  }
  r.detail = r.pass ? s.str() : r.detail + " | " + s.str();
  return r;
}

CheckResult check_score_ordering(const eval::OODReport& five_shot, std::ostream& log) {
  const eval::DensityTable table = eval::export_score_densities(five_shot.oe_scores, 30, five_shot.ways);
  log << eval::format_density_table(table);
  CheckResult r;
  double worst_mass = 0.0;
  auto mean_of = [&](const std::string& group) {
    for (const auto& g : table.groups) {
      if (g.group == group) return g.mean;
    }
    r.fail("missing group " + group);
    return 0.0;
  };
  for (const auto& g : table.groups) {
    double mass = 0.0;
    for (double v : g.density) mass += v * table.bin_width();
    worst_mass = std::max(worst_mass, std::abs(mass - 1.0));
  }
  const double soc = mean_of(eval::kGroupSocId);
  const double eoc = mean_of(eval::kGroupEocId);
  const double hold = mean_of(eval::kGroupHoldout);
  std::ostringstream s;
  s << "mean S_ID SOC-ID " << format_real(soc, 6) << " > EOC-ID " << format_real(eoc, 6) << " > Holdout-OOD "
    << format_real(hold, 6) << "; max density mass error " << worst_mass;
  if (!(soc > eoc && eoc > hold)) r.fail("score means out of order");
  if (worst_mass > kDensityTolerance) r.fail("density mass error " + std::to_string(worst_mass));
  r.detail = r.pass ? s.str() : r.detail + " | " + s.str();
  return r;
}

// Small end-to-end config exercising every command.
Json replay_config() {
  const Json task{{"num_classes", 6}, {"chips_per_class", 16}, {"chip_size", 16}};
  const Json pre{{"num_classes", 4}, {"chips_per_class", 16}, {"chip_size", 16}, {"template_seed", 77}};
  const Json other{{"num_classes", 3}, {"chips_per_class", 8}, {"chip_size", 16}, {"template_seed", 99},
                   {"background_level", 0.15}};
  return Json{
      {"master_seed", 21},
      {"workers", 2},
      {"task_pool", {{"synthetic", task}, {"seed", 1}, {"eoc_shift", 0.5}, {"eoc_chips_per_class", 6}}},
      {"pretrain_pool", {{"synthetic", pre}, {"seed", 2}}},
      {"augment", {{"crop_out_size", 16}}},
      {"ssl", {{"epochs", 2}, {"batch_size", 16}, {"encoder", {{"input_size", 16}, {"channels", {8, 16}}}}}},
      {"fsl", {{"iterations", 40}}},
      {"scratch", {{"iterations", 10}}},
      {"evaluate", {{"ways", {3}}, {"shots", {1, 5}}, {"num_runs", 4}, {"eoc", true}}},
      {"ood",
       {{"ways", 3},
        {"shots", {1, 5}},
        {"num_runs", 4},
        {"holdout_count", 2},
        {"fake_data_count", 40},
        {"sets", Json::array({{{"name", "Other"}, {"synthetic", other}, {"seed", 4}}})}}}};
}

CheckResult check_replay(const fs::path& work) {
  const fs::path dir = work / "replay";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path config = dir / "config.json";
  write_file_atomic(config, replay_config().dump(2));
  CheckResult r;
  auto invoke = [&](std::vector<std::string> args) {
    args.insert(args.begin(), "sarfsl");
    std::vector<const char*> argv;
    for (const std::string& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    if (cli::run(static_cast<int>(argv.size()), argv.data(), out, err) != 0) r.fail(err.str());
  };
  for (const std::string rep : {"a", "b"}) {
    const fs::path out = dir / rep;
    invoke({"pretrain", "-c", config.string(), "-o", (out / "enc.ckpt").string()});
    invoke({"evaluate", "-c", config.string(), "--checkpoint", (out / "enc.ckpt").string(), "-o",
            (out / "eval").string()});
    invoke({"ood-eval", "-c", config.string(), "--checkpoint", (out / "enc.ckpt").string(), "-o",
            (out / "ood").string()});
    invoke({"plot", (out / "ood" / "scores_3way_5shot_oe.tsv").string(), "-o", (out / "fig.svg").string()});
    if (!r.pass) return r;
  }
  int compared = 0;
  for (const auto& entry : fs::recursive_directory_iterator(dir / "a")) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), dir / "a");
    const fs::path other = dir / "b" / rel;
    ++compared;
    if (!fs::exists(other) || read_text_file(entry.path()) != read_text_file(other)) {
      r.fail("differs: " + rel.generic_string());
    }
  }
  if (compared == 0) r.fail("no outputs");
  if (r.pass) r.detail = std::to_string(compared) + " files byte-identical across two replays";
  return r;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sarfsl acceptance suite"};
  std::string work_dir = "acceptance_work";
  bool skip_desk = false;
  app.add_option("--work-dir", work_dir, "Scratch directory for checkpoints and reports");
  app.add_flag("--skip-desk", skip_desk, "Run only the fast criteria (1-5 and 10)");
  CLI11_PARSE(app, argc, argv);
  const fs::path work(work_dir);
  fs::create_directories(work);

  Report rep;
  timed(rep, 1, "nt-xent oracle", [] { return criteria::check_nt_xent(100, 1); });
  timed(rep, 2, "lambda-zero reduction", [] { return criteria::check_lambda_zero(2); });
  timed(rep, 3, "auroc oracle", [] { return criteria::check_auroc(1000, 3); });
  timed(rep, 4, "msp contracts", [] { return criteria::check_msp(100000, 4); });
  timed(rep, 5, "augmentation properties", [] { return criteria::check_augment(1000, 5); });

  if (!skip_desk) {
    std::optional<Desk> desk;
    std::vector<eval::OODReport> ood;
    std::optional<std::string> setup_error;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      desk.emplace(build_desk(work, rep.log));
    } catch (const std::exception& e) {
      setup_error = e.what();
    }
    std::cout << "desk setup " << format_fixed(seconds_since(t0), 1) << "s" << std::endl;
    auto need_desk = [&]() {
      if (setup_error) throw std::runtime_error("desk setup failed: " + *setup_error);
    };
    timed(rep, 6, "ssl beats scratch (5-way 5-shot)", [&] {
      need_desk();
      return check_accuracy_margin(*desk, rep.log);
    });
    const auto t1 = std::chrono::steady_clock::now();
    std::string ood_error;
    try {
      need_desk();
      ood = run_ood_grid(*desk, rep.log);
    } catch (const std::exception& e) {
      ood_error = e.what();
    }
    std::cout << "ood grid " << format_fixed(seconds_since(t1), 1) << "s" << std::endl;
    auto need_ood = [&]() {
      if (!ood_error.empty()) throw std::runtime_error("ood grid failed: " + ood_error);
    };
    timed(rep, 7, "oe beats basic (7-way 5-shot)", [&] {
      need_ood();
      return check_oe_beats_basic(ood[1]);
    });
    timed(rep, 8, "holdout auroc shots trend", [&] {
      need_ood();
      return check_shots_trend(ood);
    });
    timed(rep, 9, "score ordering and density export", [&] {
      need_ood();
      return check_score_ordering(ood[1], rep.log);
    });
  }
  timed(rep, 10, "end-to-end replay", [&] { return check_replay(work); });

  write_file_atomic(work / "acceptance_report.txt", rep.log.str());
  std::cout << (rep.failures == 0 ? "all criteria passed" : std::to_string(rep.failures) + " criteria failed")
            << std::endl;
  return rep.failures == 0 ? 0 : 1;
}
