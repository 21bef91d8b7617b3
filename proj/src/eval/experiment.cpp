#include "sarfsl/eval/experiment.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <numeric>
#include <thread>
#include <unordered_set>

#include "sarfsl/augment/transforms.hpp"
#include "sarfsl/fsl/scratch.hpp"

namespace sarfsl::eval {

std::uint64_t feature_bank_seed(std::uint64_t master_seed) { return derive_seed(master_seed, 0xbacc); }

FeatureBank build_feature_bank(const ssl::Encoder& encoder, const DatasetPool& pool, int views,
                               double noise_std, double flip_prob, std::uint64_t seed) {
  require(views >= 1, ErrorKind::kConfig, "feature bank needs at least one view");
  FeatureBank bank;
  bank.views.push_back(ssl::extract_features(encoder, pool.chips));
  std::vector<Chip> augmented(pool.size());
  for (int v = 1; v < views; ++v) {
    const std::uint64_t view_seed = derive_seed(seed, static_cast<std::uint64_t>(v));
    for (std::size_t i = 0; i < pool.size(); ++i) {
      Rng rng(derive_seed(view_seed, i));
      augmented[i] = augment::stage2_augment(pool.chips[i], noise_std, flip_prob, rng);
    }
    bank.views.push_back(ssl::extract_features(encoder, augmented));
  }
  return bank;
}

FeatureMatrix gather_rows(const FeatureMatrix& features, const std::vector<std::size_t>& indices) {
  FeatureMatrix out(static_cast<Eigen::Index>(indices.size()), features.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = features.row(static_cast<Eigen::Index>(indices[i]));
  }
  return out;
}

FeatureMatrix gather_views(const FeatureBank& bank, const std::vector<std::size_t>& indices) {
  const Eigen::Index n = static_cast<Eigen::Index>(indices.size());
  FeatureMatrix out(n * bank.num_views(), bank.clean().cols());
  for (int v = 0; v < bank.num_views(); ++v) out.middleRows(v * n, n) = gather_rows(bank.views[v], indices);
  return out;
}

std::string method_name(Method m) {
  switch (m) {
    case Method::kScratchSmall: return "scratch-small_conv";
    case Method::kScratchDeep: return "scratch-deep_conv";
    case Method::kSslBasic: return "ssl+basic";
    case Method::kSslOE: return "ssl+oe";
  }
  return "?";
}

Method method_from_name(const std::string& name) {
  for (Method m : {Method::kScratchSmall, Method::kScratchDeep, Method::kSslBasic, Method::kSslOE}) {
    if (method_name(m) == name) return m;
  }
  fail(ErrorKind::kConfig, "unknown method '" + name +
                               "' (expected scratch-small_conv, scratch-deep_conv, ssl+basic or ssl+oe)");
}

MeanCI mean_ci95(const std::vector<double>& values) {
  require(!values.empty(), ErrorKind::kMetric, "mean_ci95: no values");
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double stdev = std::sqrt(ss / (n - 1.0));
  return {mean, 1.96 * stdev / std::sqrt(n)};
}

std::uint64_t run_seed(std::uint64_t master_seed, int run) {
  return derive_seed(master_seed, static_cast<std::uint64_t>(run));
}

namespace {

// Runs fn(r) for r in [0, n) on `workers` threads. Results land in run order;
// the lowest-index failure is rethrown, so outcomes never depend on
// scheduling.
template <typename R, typename Fn>
std::vector<R> for_each_run(int n, int workers, Fn&& fn) {
  std::vector<R> out(static_cast<std::size_t>(n));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  std::atomic<int> next{0};
  auto work = [&] {
    for (int r; (r = next.fetch_add(1)) < n;) {
      try {
        out[static_cast<std::size_t>(r)] = fn(r);
      } catch (const Error& e) {
        errors[static_cast<std::size_t>(r)] =
            std::make_exception_ptr(Error(e.kind(), "run " + std::to_string(r) + ": " + e.what()));
      } catch (...) {
        errors[static_cast<std::size_t>(r)] = std::current_exception();
      }
    }
  };
  const int threads = std::clamp(workers, 1, std::max(1, n));
  if (threads == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

fsl::EpisodeSpec episode_spec(int ways, int shots, int holdout, const RunOptions& o) {
  fsl::EpisodeSpec s;
  s.ways = ways;
  s.shots = shots;
  s.query_per_class = o.query_per_class;
  s.holdout_count = holdout;
  s.support_condition = o.support_condition;
  s.query_condition = o.query_condition;
  return s;
}

std::vector<const Chip*> chip_ptrs(const DatasetPool& pool, const std::vector<std::size_t>& idx) {
  std::vector<const Chip*> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(&pool.chips[i]);
  return out;
}

void check_pool(const Context& ctx) {
  require(ctx.pool != nullptr, ErrorKind::kConfig, "experiment: no task pool");
  require(ctx.pool->labeled(), ErrorKind::kSampling, "experiment: the task pool must be labeled");
  require(ctx.pool->num_classes() >= 2, ErrorKind::kSampling, "experiment: the task pool needs >= 2 classes");
}

// Uses the context's bank, or builds one from the training config.
const FeatureBank& ensure_bank(const Context& ctx, const fsl::FSLTrainConfig& cfg, std::uint64_t master,
                               FeatureBank& storage) {
  if (ctx.bank != nullptr) {
    require(ctx.bank->clean().rows() == static_cast<Eigen::Index>(ctx.pool->size()), ErrorKind::kShape,
            "experiment: feature bank does not match the task pool");
    return *ctx.bank;
  }
  require(ctx.encoder != nullptr, ErrorKind::kConfig, "experiment: SSL methods need an encoder");
  storage = build_feature_bank(*ctx.encoder, *ctx.pool, cfg.feature_views, cfg.stage2_noise_std, cfg.flip_prob,
                               feature_bank_seed(master));
  return storage;
}

std::vector<std::size_t> subsample(const std::vector<std::size_t>& indices, std::size_t k, Rng& rng) {
  if (indices.size() <= k) return indices;
  std::vector<std::size_t> out;
  for (std::size_t j : sample_without_replacement(indices.size(), k, rng)) out.push_back(indices[j]);
  return out;
}

}  // namespace

AccuracySummary run_accuracy_experiment(const Context& ctx, Method method, int ways, int shots,
                                        const RunOptions& options, const fsl::FSLTrainConfig& fsl_cfg,
                                        const fsl::FSLTrainConfig& scratch_cfg) {
  check_pool(ctx);
  require(options.num_runs >= 1, ErrorKind::kConfig, "num_runs must be >= 1");
  const bool scratch = method == Method::kScratchSmall || method == Method::kScratchDeep;
  FeatureBank storage;
  const FeatureBank* bank = scratch ? nullptr : &ensure_bank(ctx, fsl_cfg, options.master_seed, storage);
  if (method == Method::kSslOE) {
    require(ctx.oe_features != nullptr && ctx.oe_features->rows() > 0, ErrorKind::kConfig,
            "ssl+oe needs OE features from a pretraining pool");
  }
  const DatasetPool& pool = *ctx.pool;
  const fsl::EpisodeSpec spec = episode_spec(ways, shots, 0, options);

  const auto accuracies = for_each_run<double>(options.num_runs, options.workers, [&](int r) {
    const std::uint64_t seed = run_seed(options.master_seed, r);
    Rng episode_rng(derive_seed(seed, 1));
    const fsl::Episode ep = fsl::sample_episode(pool, spec, episode_rng);
    if (scratch) {
      fsl::FSLTrainConfig cfg = scratch_cfg;
      cfg.seed = derive_seed(seed, 2);
      const auto model = fsl::train_scratch_baseline(
          chip_ptrs(pool, ep.support), ep.support_labels,
          method == Method::kScratchSmall ? fsl::kScratchSmall : fsl::kScratchDeep, cfg);
      return fsl::accuracy_percent(fsl::argmax_rows(fsl::predict(model, chip_ptrs(pool, ep.query))),
                                   ep.query_labels);
    }
    fsl::FSLTrainConfig cfg = fsl_cfg;
    cfg.seed = derive_seed(seed, 2);
    const FeatureMatrix support = gather_views(*bank, ep.support);
    const fsl::Classifier clf = fsl::train_classifier(
        support, ep.support_labels, method == Method::kSslOE ? ctx.oe_features : nullptr, cfg);
    return fsl::accuracy_percent(fsl::argmax_rows(fsl::predict(clf, gather_rows(bank->clean(), ep.query))),
                                 ep.query_labels);
  });

  AccuracySummary s;
  s.ways = ways;
  s.shots = shots;
  s.method = method_name(method);
  s.condition = options.query_condition;
  s.num_runs = options.num_runs;
  s.per_run = accuracies;
  const MeanCI m = mean_ci95(accuracies);
  s.mean_accuracy = m.mean;
  s.ci95_halfwidth = m.ci95;
  return s;
}

AccuracySummary run_eoc_experiment(const Context& ctx, Method method, int ways, int shots, RunOptions options,
                                   const fsl::FSLTrainConfig& fsl_cfg, const fsl::FSLTrainConfig& scratch_cfg,
                                   const std::string& eoc_condition) {
  options.query_condition = eoc_condition;
  return run_accuracy_experiment(ctx, method, ways, shots, options, fsl_cfg, scratch_cfg);
}

namespace {

struct OODRun {
  double basic_acc = 0.0;
  double oe_acc = 0.0;
  std::vector<double> basic_auroc;  // per row
  std::vector<double> oe_auroc;
  std::vector<ood::ScoreSet> basic_scores;
  std::vector<ood::ScoreSet> oe_scores;
};

void check_disjoint(const std::unordered_set<std::uint64_t>& oe, const DatasetPool& pool, const std::string& name) {
  for (std::size_t i = 0; i < pool.size(); ++i) {
    require(!oe.count(chip_fingerprint(pool.chips[i])), ErrorKind::kProtocol,
            name + " chip " + std::to_string(i) + " also appears in the OE pool");
  }
}

void append_scores(std::vector<ood::ScoreSet>& into, const std::vector<ood::ScoreSet>& from) {
  for (const ood::ScoreSet& s : from) {
    auto it = std::find_if(into.begin(), into.end(), [&](const ood::ScoreSet& t) { return t.group == s.group; });
    if (it == into.end()) {
      into.push_back(s);
    } else {
      it->scores.insert(it->scores.end(), s.scores.begin(), s.scores.end());
    }
  }
}

}  // namespace

OODReport run_ood_experiment(const Context& ctx, const std::vector<OODSet>& ood_sets, int ways, int shots,
                             const OODOptions& options, const fsl::FSLTrainConfig& fsl_cfg) {
  check_pool(ctx);
  options.detector.validate();
  const RunOptions& ro = options.runs;
  require(ro.num_runs >= 1, ErrorKind::kConfig, "num_runs must be >= 1");
  require(ctx.oe_pool != nullptr && ctx.oe_features != nullptr && ctx.oe_features->rows() > 0,
          ErrorKind::kConfig, "OOD experiments need an OE pool and its features");
  require(options.holdout_count > 0 || !ood_sets.empty(), ErrorKind::kConfig,
          "OOD experiment has no OOD sets (holdout_count = 0 and no external sets)");
  const DatasetPool& pool = *ctx.pool;

  std::unordered_set<std::uint64_t> oe_prints;
  for (const Chip& c : ctx.oe_pool->chips) oe_prints.insert(chip_fingerprint(c));
  check_disjoint(oe_prints, pool, "task pool");
  for (const OODSet& set : ood_sets) {
    require(set.pool != nullptr && !set.pool->empty(), ErrorKind::kEmptyPool, "OOD set '" + set.name + "' is empty");
    require(set.name != kHoldoutSet, ErrorKind::kConfig, "OOD set name '" + set.name + "' is reserved");
    check_disjoint(oe_prints, *set.pool, "OOD set '" + set.name + "'");
  }

  FeatureBank storage;
  const FeatureBank& bank = ensure_bank(ctx, fsl_cfg, ro.master_seed, storage);
  std::vector<FeatureMatrix> own_features(ood_sets.size());
  std::vector<const FeatureMatrix*> set_features(ood_sets.size());
  for (std::size_t s = 0; s < ood_sets.size(); ++s) {
    if (ood_sets[s].features != nullptr) {
      require(ood_sets[s].features->rows() == static_cast<Eigen::Index>(ood_sets[s].pool->size()),
              ErrorKind::kShape, "OOD set '" + ood_sets[s].name + "': features do not match the pool");
      set_features[s] = ood_sets[s].features;
    } else {
      require(ctx.encoder != nullptr, ErrorKind::kConfig, "OOD sets without features need an encoder");
      own_features[s] = ssl::extract_features(*ctx.encoder, ood_sets[s].pool->chips);
      set_features[s] = &own_features[s];
    }
  }

  const fsl::EpisodeSpec spec = episode_spec(ways, shots, options.holdout_count, ro);
  const double tau = options.detector.temperature;

  const auto runs = for_each_run<OODRun>(ro.num_runs, ro.workers, [&](int r) {
    const std::uint64_t seed = run_seed(ro.master_seed, r);
    Rng episode_rng(derive_seed(seed, 1));
    const fsl::Episode ep = fsl::sample_episode(pool, spec, episode_rng);
    fsl::FSLTrainConfig cfg = fsl_cfg;
    cfg.seed = derive_seed(seed, 2);
    const FeatureMatrix support = gather_views(bank, ep.support);
    fsl::Classifier heads[2] = {fsl::train_classifier(support, ep.support_labels, nullptr, cfg),
                                fsl::train_classifier(support, ep.support_labels, ctx.oe_features, cfg)};

    Rng sample_rng(derive_seed(seed, 3));
    const std::size_t n_id = ep.query.size();
    // (group name, features) for every scored OOD set of this run.
    std::vector<std::pair<std::string, FeatureMatrix>> sets;
    if (options.holdout_count > 0) {
      sets.emplace_back(kHoldoutSet, gather_rows(bank.clean(), subsample(ep.holdout_query, n_id, sample_rng)));
    }
    for (std::size_t s = 0; s < ood_sets.size(); ++s) {
      std::vector<std::size_t> all(static_cast<std::size_t>(set_features[s]->rows()));
      std::iota(all.begin(), all.end(), std::size_t{0});
      sets.emplace_back(ood_sets[s].name, gather_rows(*set_features[s], subsample(all, n_id, sample_rng)));
    }
    FeatureMatrix eoc;
    if (options.collect_scores && !options.eoc_condition.empty()) {
      std::vector<std::size_t> idx;
      for (std::size_t i = 0; i < pool.size(); ++i) {
        const int c = (*pool.labels)[i];
        if (pool.tag(i, tags::kCondition) == options.eoc_condition &&
            std::find(ep.class_map.begin(), ep.class_map.end(), c) != ep.class_map.end()) {
          idx.push_back(i);
        }
      }
      eoc = gather_rows(bank.clean(), subsample(idx, n_id, sample_rng));
    }

    const FeatureMatrix query = gather_rows(bank.clean(), ep.query);
    OODRun out;
    for (int mode = 0; mode < 2; ++mode) {
      heads[mode].temperature = tau;
      const FeatureMatrix logits = fsl::predict(heads[mode], query);
      const double acc = fsl::accuracy_percent(fsl::argmax_rows(logits), ep.query_labels);
      const std::vector<double> id_scores = ood::msp_scores(logits, tau);
      std::vector<double>& aurocs = mode == 0 ? out.basic_auroc : out.oe_auroc;
      std::vector<ood::ScoreSet>& scores = mode == 0 ? out.basic_scores : out.oe_scores;
      (mode == 0 ? out.basic_acc : out.oe_acc) = acc;
      if (options.collect_scores) scores.push_back({kGroupSocId, id_scores});
      if (options.collect_scores && eoc.rows() > 0) {
        scores.push_back({kGroupEocId, ood::msp_scores(fsl::predict(heads[mode], eoc), tau)});
      }
      for (const auto& [name, feats] : sets) {
        require(feats.rows() > 0, ErrorKind::kSampling, "OOD set '" + name + "' yielded no chips for this episode");
        const std::vector<double> ood_scores = ood::msp_scores(fsl::predict(heads[mode], feats), tau);
        aurocs.push_back(ood::auroc(id_scores, ood_scores));
        if (options.collect_scores) scores.push_back({name == kHoldoutSet ? kGroupHoldout : name, ood_scores});
      }
    }
    return out;
  });

  OODReport report;
  report.ways = ways;
  report.shots = shots;
  report.num_runs = ro.num_runs;
  std::vector<std::string> names;
  if (options.holdout_count > 0) names.push_back(kHoldoutSet);
  for (const OODSet& s : ood_sets) names.push_back(s.name);
  std::vector<double> basic_acc;
  std::vector<double> oe_acc;
  for (std::size_t k = 0; k < names.size(); ++k) {
    OODRow row;
    row.set = names[k];
    for (const OODRun& run : runs) {
      row.basic_per_run.push_back(run.basic_auroc[k]);
      row.oe_per_run.push_back(run.oe_auroc[k]);
    }
    row.basic = mean_ci95(row.basic_per_run).mean;
    row.oe = mean_ci95(row.oe_per_run).mean;
    report.rows.push_back(std::move(row));
  }
  for (const OODRun& run : runs) {
    basic_acc.push_back(run.basic_acc);
    oe_acc.push_back(run.oe_acc);
    append_scores(report.basic_scores, run.basic_scores);
    append_scores(report.oe_scores, run.oe_scores);
  }
  report.basic_accuracy = mean_ci95(basic_acc).mean;
  report.oe_accuracy = mean_ci95(oe_acc).mean;
  return report;
}

}  // namespace sarfsl::eval
