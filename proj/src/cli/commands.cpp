#include "sarfsl/cli/commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <ostream>

#include "sarfsl/core/io.hpp"
#include "sarfsl/data_io/manifest.hpp"
#include "sarfsl/eval/experiment.hpp"
#include "sarfsl/eval/report.hpp"
#include "sarfsl/ssl/checkpoint.hpp"

namespace sarfsl::cli {

namespace fs = std::filesystem;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig:
    case ErrorKind::kConfigNotFound:
      return 2;
    case ErrorKind::kSchema:
    case ErrorKind::kLoad:
    case ErrorKind::kEmptyPool:
    case ErrorKind::kSampling:
    case ErrorKind::kShape:
    case ErrorKind::kProtocol:
    case ErrorKind::kEmptyScores:
      return 3;
    default:
      return 4;
  }
}

namespace {

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, ErrorKind::kRuntime, "cannot create directory " + dir.string() + ": " + ec.message());
}

void write_output(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) ensure_dir(path.parent_path());
  write_file_atomic(path, contents);
}

bool is_ssl(eval::Method m) { return m == eval::Method::kSslBasic || m == eval::Method::kSslOE; }

bool has_condition(const DatasetPool& pool, const std::string& condition) {
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (pool.tag(i, tags::kCondition) == condition) return true;
  }
  return false;
}

void check_encoder_input(const ssl::Encoder& encoder, const DatasetPool& pool, const std::string& name) {
  const int size = encoder.spec().input_size;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    require(pool.chips[i].height == size && pool.chips[i].width == size, ErrorKind::kShape,
            name + " chip " + std::to_string(i) + " is " + std::to_string(pool.chips[i].height) + "x" +
                std::to_string(pool.chips[i].width) + ", the encoder expects " + std::to_string(size));
  }
}

std::string config_text(const RunConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

}  // namespace

void cmd_pretrain(const RunConfig& cfg, const fs::path& checkpoint, std::ostream& log) {
  const DatasetPool pool = load_pretrain_pool(cfg);
  log << "pretrain: " << cfg.ssl.algorithm << " on " << pool.size() << " chips, " << cfg.ssl.epochs
      << " epochs\n";
  const ssl::PretrainResult result = ssl::pretrain(pool, cfg.augment, cfg.ssl);
  fs::path log_path = checkpoint;
  log_path.replace_extension(".train_log.jsonl");
  if (checkpoint.has_parent_path()) ensure_dir(checkpoint.parent_path());
  ssl::save_encoder_checkpoint(checkpoint, result.encoder, cfg.ssl, cfg.augment.hash());
  write_output(log_path, ssl::training_log_jsonl(result.log));
  if (!result.log.empty()) {
    log << "pretrain: final mean loss " << format_real(result.log.back().mean_loss, 6) << "\n";
  }
  log << "pretrain: wrote " << checkpoint.string() << " and " << log_path.string() << "\n";
}

void cmd_evaluate(const RunConfig& cfg, const std::optional<fs::path>& checkpoint, const fs::path& out_dir,
                  std::ostream& log) {
  std::vector<eval::Method> methods;
  for (const std::string& name : cfg.evaluate.methods) methods.push_back(eval::method_from_name(name));
  const bool need_encoder = std::any_of(methods.begin(), methods.end(), is_ssl);
  const bool need_oe = std::count(methods.begin(), methods.end(), eval::Method::kSslOE) > 0;
  require(!need_encoder || checkpoint.has_value(), ErrorKind::kConfig, "ssl methods need --checkpoint");
  require(!need_oe || cfg.pretrain_pool.has_value(), ErrorKind::kConfig,
          "method ssl+oe needs a pretrain_pool section (the OE pool)");

  const DatasetPool pool = load_task_pool(cfg);
  require(!cfg.evaluate.eoc || has_condition(pool, tags::kEocTest), ErrorKind::kConfig,
          "evaluate.eoc is set but the task pool has no EOC-test chips");
  std::optional<ssl::EncoderCheckpoint> ckpt;
  DatasetPool oe_pool;
  eval::FeatureBank bank;
  ssl::FeatureMatrix oe_features;
  eval::Context ctx;
  ctx.pool = &pool;
  if (need_encoder) {
    ckpt = ssl::load_encoder_checkpoint(*checkpoint);
    check_encoder_input(ckpt->encoder, pool, "task pool");
    bank = eval::build_feature_bank(ckpt->encoder, pool, cfg.fsl.feature_views, cfg.fsl.stage2_noise_std,
                                    cfg.fsl.flip_prob, eval::feature_bank_seed(cfg.master_seed));
    ctx.encoder = &ckpt->encoder;
    ctx.bank = &bank;
  }
  if (need_oe) {
    oe_pool = load_pretrain_pool(cfg);
    check_encoder_input(ckpt->encoder, oe_pool, "pretraining pool");
    oe_features = ssl::extract_features(ckpt->encoder, oe_pool.chips);
    ctx.oe_pool = &oe_pool;
    ctx.oe_features = &oe_features;
  }

  eval::RunOptions options;
  options.num_runs = cfg.evaluate.num_runs;
  options.master_seed = cfg.master_seed;
  options.query_per_class = cfg.evaluate.query_per_class;
  options.workers = cfg.workers;

  std::vector<eval::AccuracySummary> summaries;
  auto report = [&](const eval::AccuracySummary& s) {
    log << "evaluate: " << s.method << " (" << s.condition << ") " << s.ways << "-way " << s.shots
        << "-shot: " << format_fixed(s.mean_accuracy, 2) << " +/- " << format_fixed(s.ci95_halfwidth, 2) << "\n";
    summaries.push_back(s);
  };
  for (eval::Method m : methods) {
    for (int ways : cfg.evaluate.ways) {
      for (int shots : cfg.evaluate.shots) {
        report(eval::run_accuracy_experiment(ctx, m, ways, shots, options, cfg.fsl, cfg.scratch));
        if (cfg.evaluate.eoc) {
          report(eval::run_eoc_experiment(ctx, m, ways, shots, options, cfg.fsl, cfg.scratch));
        }
      }
    }
  }
  ensure_dir(out_dir);
  write_output(out_dir / "accuracy.md", eval::render_accuracy_table(summaries));
  write_output(out_dir / "accuracy.jsonl", eval::accuracy_jsonl(summaries));
  write_output(out_dir / "run_config.json", config_text(cfg));
  log << "evaluate: wrote " << (out_dir / "accuracy.md").string() << "\n";
}

void cmd_ood_eval(const RunConfig& cfg, const fs::path& checkpoint, const fs::path& out_dir, std::ostream& log) {
  require(cfg.pretrain_pool.has_value(), ErrorKind::kConfig, "ood-eval needs a pretrain_pool section (the OE pool)");
  const DatasetPool pool = load_task_pool(cfg);
  const DatasetPool oe_pool = load_pretrain_pool(cfg);
  std::vector<DatasetPool> set_pools;
  std::vector<std::string> set_names;
  for (const OODSetConfig& s : cfg.ood.sets) {
    set_pools.push_back(strip_labels(load_pool(cfg, s.source)));
    set_names.push_back(s.name);
  }
  if (cfg.ood.fake_data) {
    set_pools.push_back(make_fake_data(cfg.ood.fake_data_count, pool.chips.front().height, cfg.ood.fake_data_seed));
    set_names.push_back(kFakeDataSet);
  }
  const ssl::EncoderCheckpoint ckpt = ssl::load_encoder_checkpoint(checkpoint);
  check_encoder_input(ckpt.encoder, pool, "task pool");
  check_encoder_input(ckpt.encoder, oe_pool, "pretraining pool");
  std::vector<ssl::FeatureMatrix> set_features;
  for (std::size_t s = 0; s < set_pools.size(); ++s) {
    require(!set_pools[s].empty(), ErrorKind::kEmptyPool, "OOD set '" + set_names[s] + "' is empty");
    check_encoder_input(ckpt.encoder, set_pools[s], "OOD set '" + set_names[s] + "'");
    set_features.push_back(ssl::extract_features(ckpt.encoder, set_pools[s].chips));
  }
  const eval::FeatureBank bank =
      eval::build_feature_bank(ckpt.encoder, pool, cfg.fsl.feature_views, cfg.fsl.stage2_noise_std,
                               cfg.fsl.flip_prob, eval::feature_bank_seed(cfg.master_seed));
  const ssl::FeatureMatrix oe_features = ssl::extract_features(ckpt.encoder, oe_pool.chips);
  const eval::Context ctx{&pool, &ckpt.encoder, &bank, &oe_pool, &oe_features};
  std::vector<eval::OODSet> sets;
  for (std::size_t s = 0; s < set_pools.size(); ++s) sets.push_back({set_names[s], &set_pools[s], &set_features[s]});

  eval::OODOptions options;
  options.runs.num_runs = cfg.ood.num_runs;
  options.runs.master_seed = cfg.master_seed;
  options.runs.query_per_class = cfg.ood.query_per_class;
  options.runs.workers = cfg.workers;
  options.holdout_count = cfg.ood.holdout_count;
  options.detector = cfg.detector;
  options.collect_scores = true;
  if (cfg.ood.score_eoc && has_condition(pool, tags::kEocTest)) options.eoc_condition = tags::kEocTest;

  std::vector<eval::OODReport> reports;
  std::vector<std::pair<std::string, std::string>> score_files;
  for (int shots : cfg.ood.shots) {
    eval::OODReport r = eval::run_ood_experiment(ctx, sets, cfg.ood.ways, shots, options, cfg.fsl);
    for (const eval::OODRow& row : r.rows) {
      log << "ood-eval: " << cfg.ood.ways << "-way " << shots << "-shot " << row.set
          << ": basic " << format_fixed(row.basic, 2) << " / oe " << format_fixed(row.oe, 2) << "\n";
    }
    const std::string stem = "scores_" + std::to_string(cfg.ood.ways) + "way_" + std::to_string(shots) + "shot_";
    score_files.emplace_back(stem + "basic.tsv", ood::format_score_file(r.basic_scores, cfg.ood.ways));
    score_files.emplace_back(stem + "oe.tsv", ood::format_score_file(r.oe_scores, cfg.ood.ways));
    r.basic_scores.clear();
    r.oe_scores.clear();
    reports.push_back(std::move(r));
  }
  ensure_dir(out_dir);
  write_output(out_dir / "ood.md", eval::render_ood_table(reports));
  write_output(out_dir / "ood.jsonl", eval::ood_jsonl(reports));
  for (const auto& [name, text] : score_files) write_output(out_dir / name, text);
  write_output(out_dir / "run_config.json", config_text(cfg));
  log << "ood-eval: wrote " << (out_dir / "ood.md").string() << "\n";
}

void cmd_plot(const std::vector<fs::path>& score_files, const fs::path& image, const PlotConfig& plot, int ways,
              std::ostream& log) {
  require(!score_files.empty(), ErrorKind::kConfig, "plot needs at least one score file");
  std::vector<ood::ScoreSet> sets;
  int file_ways = 0;
  for (const fs::path& path : score_files) {
    const ood::ScoreFile f = ood::read_score_file(path);
    if (f.ways > 0) {
      require(file_ways == 0 || file_ways == f.ways, ErrorKind::kSchema,
              "score files disagree on the number of ways");
      file_ways = f.ways;
    }
    for (const ood::ScoreSet& s : f.sets) {
      auto it = std::find_if(sets.begin(), sets.end(), [&](const ood::ScoreSet& t) { return t.group == s.group; });
      if (it == sets.end()) {
        sets.push_back(s);
      } else {
        it->scores.insert(it->scores.end(), s.scores.begin(), s.scores.end());
      }
    }
  }
  const int m = ways > 0 ? ways : file_ways;
  require(m >= 2, ErrorKind::kConfig, "plot: number of ways unknown (no #ways line; pass --ways)");
  const eval::DensityTable table = eval::export_score_densities(sets, plot.bins, m, plot.tpr_targets);
  fs::path tsv = image;
  tsv.replace_extension(".tsv");
  write_output(image, eval::render_density_svg(table, "S_ID density, " + std::to_string(m) + "-way"));
  write_output(tsv, eval::format_density_table(table));
  log << "plot: " << sets.size() << " groups; wrote " << image.string() << " and " << tsv.string() << "\n";
}

void cmd_make_data(const RunConfig& cfg, const fs::path& out_dir, std::ostream& log) {
  const DatasetPool task = load_task_pool(cfg);
  std::optional<DatasetPool> pre;
  if (cfg.pretrain_pool) pre = load_pretrain_pool(cfg);
  std::vector<std::pair<std::string, DatasetPool>> sets;
  for (const OODSetConfig& s : cfg.ood.sets) sets.emplace_back(s.name, strip_labels(load_pool(cfg, s.source)));

  RunConfig exported = cfg;
  exported.base_dir = out_dir;
  exported.task_pool = TaskPoolConfig{};
  exported.task_pool.source.manifest = "task/manifest.tsv";
  ensure_dir(out_dir / "task");
  save_manifest(task, out_dir / "task" / "manifest.tsv");
  log << "make-data: task pool " << task.size() << " chips\n";
  if (pre) {
    exported.pretrain_pool = PoolSource{};
    exported.pretrain_pool->manifest = "pretrain/manifest.tsv";
    ensure_dir(out_dir / "pretrain");
    save_manifest(*pre, out_dir / "pretrain" / "manifest.tsv");
    log << "make-data: pretraining pool " << pre->size() << " chips\n";
  }
  for (std::size_t i = 0; i < sets.size(); ++i) {
    const fs::path rel = fs::path("ood") / sets[i].first / "manifest.tsv";
    exported.ood.sets[i].source = PoolSource{};
    exported.ood.sets[i].source.manifest = rel.generic_string();
    ensure_dir((out_dir / rel).parent_path());
    save_manifest(sets[i].second, out_dir / rel);
    log << "make-data: OOD set " << sets[i].first << " " << sets[i].second.size() << " chips\n";
  }
  write_output(out_dir / "run_config.json", config_text(exported));
}

// ---------------------------------------------------------------------------

namespace {

struct CommonArgs {
  std::string config;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::string out;
  std::string checkpoint;
};

void add_common(CLI::App* cmd, CommonArgs& a, bool with_seed, bool with_workers) {
  cmd->add_option("-c,--config", a.config, "run-config JSON file")->required();
  cmd->add_option("-s,--set", a.overrides, "override a config value (dotted.key=value), repeatable");
  if (with_seed) cmd->add_option("--seed", a.seed, "seed override");
  if (with_workers) cmd->add_option("--workers", a.workers, "parallel runs");
  cmd->add_option("-o,--out", a.out, "output path")->required();
}

RunConfig config_from_args(const CommonArgs& a, const std::string& seed_key) {
  std::vector<std::string> overrides = a.overrides;
  if (a.seed) overrides.push_back(seed_key + "=" + std::to_string(*a.seed));
  if (a.workers) overrides.push_back("workers=" + std::to_string(*a.workers));
  return load_run_config(a.config, overrides);
}

std::string one_line(std::string text) {
  std::replace(text.begin(), text.end(), '\n', ' ');
  return text;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Self-supervised few-shot SAR target recognition with outlier-exposure OOD detection", "sarfsl"};
  app.require_subcommand(1);

  CommonArgs pre, evalu, ood_args, data;
  CLI::App* c_pre = app.add_subcommand("pretrain", "pretrain an encoder on the unlabeled pool");
  add_common(c_pre, pre, true, false);
  CLI::App* c_eval = app.add_subcommand("evaluate", "few-shot accuracy grid");
  add_common(c_eval, evalu, true, true);
  c_eval->add_option("--checkpoint", evalu.checkpoint, "encoder checkpoint");
  CLI::App* c_ood = app.add_subcommand("ood-eval", "OOD detection grid, basic vs OE heads");
  add_common(c_ood, ood_args, true, true);
  c_ood->add_option("--checkpoint", ood_args.checkpoint, "encoder checkpoint")->required();
  CLI::App* c_data = app.add_subcommand("make-data", "export the configured pools as manifests");
  add_common(c_data, data, false, false);

  std::vector<std::string> score_files;
  std::string plot_out;
  std::string plot_config;
  std::vector<std::string> plot_overrides;
  std::optional<int> plot_bins;
  std::vector<double> plot_tpr;
  int plot_ways = 0;
  CLI::App* c_plot = app.add_subcommand("plot", "density plot of score files");
  c_plot->add_option("scores", score_files, "score files")->required();
  c_plot->add_option("-o,--out", plot_out, "output SVG path")->required();
  c_plot->add_option("-c,--config", plot_config, "run-config JSON file (plot section)");
  c_plot->add_option("-s,--set", plot_overrides, "override a config value (dotted.key=value)");
  c_plot->add_option("--bins", plot_bins, "histogram bins");
  c_plot->add_option("--tpr", plot_tpr, "TPR targets for threshold markers");
  c_plot->add_option("--ways", plot_ways, "number of ways (default: from the score files)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << error_category(ErrorKind::kConfig) << ": " << one_line(e.what()) << "\n";
    return exit_code(ErrorKind::kConfig);
  }

  try {
    if (c_pre->parsed()) {
      cmd_pretrain(config_from_args(pre, "ssl.seed"), pre.out, out);
    } else if (c_eval->parsed()) {
      std::optional<fs::path> ckpt;
      if (!evalu.checkpoint.empty()) ckpt = evalu.checkpoint;
      cmd_evaluate(config_from_args(evalu, "master_seed"), ckpt, evalu.out, out);
    } else if (c_ood->parsed()) {
      cmd_ood_eval(config_from_args(ood_args, "master_seed"), ood_args.checkpoint, ood_args.out, out);
    } else if (c_data->parsed()) {
      cmd_make_data(config_from_args(data, ""), data.out, out);
    } else if (c_plot->parsed()) {
      PlotConfig plot;
      if (!plot_config.empty()) plot = load_run_config(plot_config, plot_overrides).plot;
      if (plot_bins) plot.bins = *plot_bins;
      if (!plot_tpr.empty()) plot.tpr_targets = plot_tpr;
      require(plot.bins >= 1, ErrorKind::kConfig, "--bins must be >= 1");
      for (double t : plot.tpr_targets) {
        require(t > 0.0 && t <= 1.0, ErrorKind::kConfig, "--tpr entries must lie in (0, 1]");
      }
      std::vector<fs::path> files(score_files.begin(), score_files.end());
      cmd_plot(files, plot_out, plot, plot_ways, out);
    }
  } catch (const Error& e) {
    err << "error: " << e.category() << ": " << one_line(e.what()) << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << error_category(ErrorKind::kRuntime) << ": " << one_line(e.what()) << "\n";
    return exit_code(ErrorKind::kRuntime);
  }
  return 0;
}

}  // namespace sarfsl::cli
