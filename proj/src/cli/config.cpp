#include "sarfsl/cli/config.hpp"

#include <algorithm>
#include <set>

#include "sarfsl/core/error.hpp"
#include "sarfsl/core/io.hpp"
#include "sarfsl/data_io/manifest.hpp"
#include "sarfsl/eval/experiment.hpp"

namespace sarfsl::cli {

namespace {

// Section validators report parameter errors; at config level they are
// config errors.
template <typename F>
void as_config_error(const std::string& section, F&& check) {
  try {
    check();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kConfig) throw;
    fail(ErrorKind::kConfig, section + ": " + e.what());
  }
}

void validate_source(const PoolSource& s, const std::string& path) {
  require(s.manifest.empty() != !s.synthetic.has_value(), ErrorKind::kConfig,
          path + ": exactly one of 'manifest' and 'synthetic' is required");
  if (s.synthetic) as_config_error(path, [&] { s.synthetic->validate(); });
}

void read_source(JsonReader& r, PoolSource& s) {
  r.get("manifest", s.manifest);
  if (const Json* j = r.child("synthetic")) s.synthetic = synthetic_spec_from_json(*j, r.key_path("synthetic"));
  r.get("seed", s.seed);
}

PoolSource source_from_json(const Json& j, const std::string& path) {
  PoolSource s;
  JsonReader r(j, path);
  read_source(r, s);
  r.finish();
  return s;
}

Json source_json(const PoolSource& s) {
  Json j = Json::object();
  if (!s.manifest.empty()) j["manifest"] = s.manifest;
  if (s.synthetic) j["synthetic"] = to_json(*s.synthetic);
  j["seed"] = s.seed;
  return j;
}

void require_positive_list(const std::vector<int>& values, int min, const std::string& path) {
  require(!values.empty(), ErrorKind::kConfig, path + ": must not be empty");
  for (int v : values) {
    require(v >= min, ErrorKind::kConfig, path + ": entries must be >= " + std::to_string(min));
  }
}

}  // namespace

void RunConfig::validate() const {
  if (!task_pool.source.manifest.empty() || task_pool.source.synthetic) {
    validate_source(task_pool.source, "task_pool");
  }
  require(task_pool.eoc_shift >= 0.0, ErrorKind::kConfig, "task_pool.eoc_shift must be >= 0");
  require(task_pool.eoc_shift == 0.0 || task_pool.source.synthetic.has_value(), ErrorKind::kConfig,
          "task_pool.eoc_shift needs a synthetic task pool");
  require(task_pool.eoc_chips_per_class >= 0, ErrorKind::kConfig, "task_pool.eoc_chips_per_class must be >= 0");
  if (pretrain_pool) validate_source(*pretrain_pool, "pretrain_pool");

  as_config_error("augment", [&] { augment.validate(); });
  as_config_error("ssl", [&] { ssl.validate(); });
  as_config_error("fsl", [&] { fsl.validate(); });
  as_config_error("scratch", [&] { scratch.validate(); });
  as_config_error("detector", [&] { detector.validate(); });
  require(augment.crop_out_size == ssl.encoder.input_size, ErrorKind::kConfig,
          "augment.crop_out_size must equal ssl.encoder.input_size");
  require(workers >= 1, ErrorKind::kConfig, "workers must be >= 1");

  require_positive_list(evaluate.ways, 2, "evaluate.ways");
  require_positive_list(evaluate.shots, 1, "evaluate.shots");
  require(!evaluate.methods.empty(), ErrorKind::kConfig, "evaluate.methods must not be empty");
  for (const std::string& m : evaluate.methods) eval::method_from_name(m);
  require(evaluate.num_runs >= 1, ErrorKind::kConfig, "evaluate.num_runs must be >= 1");
  require(evaluate.query_per_class >= 0, ErrorKind::kConfig, "evaluate.query_per_class must be >= 0");

  require(ood.ways >= 2, ErrorKind::kConfig, "ood.ways must be >= 2");
  require_positive_list(ood.shots, 1, "ood.shots");
  require(ood.num_runs >= 1, ErrorKind::kConfig, "ood.num_runs must be >= 1");
  require(ood.holdout_count >= 0, ErrorKind::kConfig, "ood.holdout_count must be >= 0");
  require(ood.query_per_class >= 0, ErrorKind::kConfig, "ood.query_per_class must be >= 0");
  require(!ood.fake_data || ood.fake_data_count >= 1, ErrorKind::kConfig, "ood.fake_data_count must be >= 1");
  std::set<std::string> names{eval::kHoldoutSet, kFakeDataSet};
  for (std::size_t i = 0; i < ood.sets.size(); ++i) {
    const std::string path = "ood.sets[" + std::to_string(i) + "]";
    require(!ood.sets[i].name.empty(), ErrorKind::kConfig, path + ".name must not be empty");
    require(names.insert(ood.sets[i].name).second, ErrorKind::kConfig,
            path + ".name '" + ood.sets[i].name + "' is reserved or duplicated");
    validate_source(ood.sets[i].source, path);
  }

  require(plot.bins >= 1, ErrorKind::kConfig, "plot.bins must be >= 1");
  for (double t : plot.tpr_targets) {
    require(t > 0.0 && t <= 1.0, ErrorKind::kConfig, "plot.tpr_targets entries must lie in (0, 1]");
  }
}

Json to_json(const RunConfig& cfg) {
  Json task = source_json(cfg.task_pool.source);
  task["eoc_shift"] = cfg.task_pool.eoc_shift;
  task["eoc_chips_per_class"] = cfg.task_pool.eoc_chips_per_class;
  task["eoc_seed"] = cfg.task_pool.eoc_seed;
  Json sets = Json::array();
  for (const OODSetConfig& s : cfg.ood.sets) {
    Json j = source_json(s.source);
    j["name"] = s.name;
    sets.push_back(std::move(j));
  }
  Json j{{"master_seed", cfg.master_seed},
         {"workers", cfg.workers},
         {"task_pool", task},
         {"augment", to_json(cfg.augment)},
         {"ssl", ssl::to_json(cfg.ssl)},
         {"fsl", fsl::to_json(cfg.fsl)},
         {"scratch", fsl::to_json(cfg.scratch)},
         {"detector", ood::to_json(cfg.detector)},
         {"evaluate",
          {{"ways", cfg.evaluate.ways},
           {"shots", cfg.evaluate.shots},
           {"methods", cfg.evaluate.methods},
           {"num_runs", cfg.evaluate.num_runs},
           {"query_per_class", cfg.evaluate.query_per_class},
           {"eoc", cfg.evaluate.eoc}}},
         {"ood",
          {{"ways", cfg.ood.ways},
           {"shots", cfg.ood.shots},
           {"num_runs", cfg.ood.num_runs},
           {"holdout_count", cfg.ood.holdout_count},
           {"query_per_class", cfg.ood.query_per_class},
           {"fake_data", cfg.ood.fake_data},
           {"fake_data_count", cfg.ood.fake_data_count},
           {"fake_data_seed", cfg.ood.fake_data_seed},
           {"sets", sets},
           {"score_eoc", cfg.ood.score_eoc}}},
         {"plot", {{"bins", cfg.plot.bins}, {"tpr_targets", cfg.plot.tpr_targets}}}};
  if (cfg.pretrain_pool) j["pretrain_pool"] = source_json(*cfg.pretrain_pool);
  return j;
}

RunConfig run_config_from_json(const Json& j, const std::filesystem::path& base_dir) {
  RunConfig cfg;
  cfg.base_dir = base_dir;
  JsonReader r(j, "");
  r.get("master_seed", cfg.master_seed);
  r.get("workers", cfg.workers);
  if (const Json* t = r.child("task_pool")) {
    JsonReader tr(*t, "task_pool");
    read_source(tr, cfg.task_pool.source);
    tr.get("eoc_shift", cfg.task_pool.eoc_shift);
    tr.get("eoc_chips_per_class", cfg.task_pool.eoc_chips_per_class);
    tr.get("eoc_seed", cfg.task_pool.eoc_seed);
    tr.finish();
  }
  if (const Json* p = r.child("pretrain_pool")) cfg.pretrain_pool = source_from_json(*p, "pretrain_pool");
  if (const Json* a = r.child("augment")) cfg.augment = augment::augmentation_config_from_json(*a, "augment");
  if (const Json* s = r.child("ssl")) cfg.ssl = ssl::ssl_config_from_json(*s, "ssl");
  if (const Json* f = r.child("fsl")) cfg.fsl = fsl::fsl_config_from_json(*f, "fsl");
  if (const Json* f = r.child("scratch")) cfg.scratch = fsl::fsl_config_from_json(*f, "scratch");
  if (const Json* d = r.child("detector")) cfg.detector = ood::detector_config_from_json(*d, "detector");
  if (const Json* e = r.child("evaluate")) {
    JsonReader er(*e, "evaluate");
    er.get("ways", cfg.evaluate.ways);
    er.get("shots", cfg.evaluate.shots);
    er.get("methods", cfg.evaluate.methods);
    er.get("num_runs", cfg.evaluate.num_runs);
    er.get("query_per_class", cfg.evaluate.query_per_class);
    er.get("eoc", cfg.evaluate.eoc);
    er.finish();
  }
  if (const Json* o = r.child("ood")) {
    JsonReader orr(*o, "ood");
    orr.get("ways", cfg.ood.ways);
    orr.get("shots", cfg.ood.shots);
    orr.get("num_runs", cfg.ood.num_runs);
    orr.get("holdout_count", cfg.ood.holdout_count);
    orr.get("query_per_class", cfg.ood.query_per_class);
    orr.get("fake_data", cfg.ood.fake_data);
    orr.get("fake_data_count", cfg.ood.fake_data_count);
    orr.get("fake_data_seed", cfg.ood.fake_data_seed);
    orr.get("score_eoc", cfg.ood.score_eoc);
    if (const Json* sets = orr.child("sets")) {
      require(sets->is_array(), ErrorKind::kConfig, "ood.sets: expected an array");
      for (std::size_t i = 0; i < sets->size(); ++i) {
        const std::string path = "ood.sets[" + std::to_string(i) + "]";
        OODSetConfig set;
        JsonReader sr((*sets)[i], path);
        sr.get("name", set.name);
        read_source(sr, set.source);
        sr.finish();
        cfg.ood.sets.push_back(std::move(set));
      }
    }
    orr.finish();
  }
  if (const Json* p = r.child("plot")) {
    JsonReader pr(*p, "plot");
    pr.get("bins", cfg.plot.bins);
    pr.get("tpr_targets", cfg.plot.tpr_targets);
    pr.finish();
  }
  r.finish();
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  require(std::filesystem::is_regular_file(path), ErrorKind::kConfigNotFound,
          "config file not found: " + path.string());
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const Error& e) {
    fail(ErrorKind::kConfigNotFound, e.what());
  }
  Json doc = parse_json(text, path.string());
  for (const std::string& o : overrides) apply_override(doc, o);
  return run_config_from_json(doc, path.parent_path());
}

std::filesystem::path resolve_path(const RunConfig& cfg, const std::string& path) {
  const std::filesystem::path p(path);
  return p.is_absolute() || cfg.base_dir.empty() ? p : cfg.base_dir / p;
}

DatasetPool load_pool(const RunConfig& cfg, const PoolSource& source) {
  if (!source.manifest.empty()) return load_manifest(resolve_path(cfg, source.manifest));
  require(source.synthetic.has_value(), ErrorKind::kConfig, "pool has neither a manifest nor a synthetic spec");
  return generate_synthetic_pool(*source.synthetic, source.seed);
}

DatasetPool load_task_pool(const RunConfig& cfg) {
  const PoolSource& src = cfg.task_pool.source;
  require(!src.manifest.empty() || src.synthetic.has_value(), ErrorKind::kConfig,
          "config has no task_pool section");
  DatasetPool pool = load_pool(cfg, src);
  require(!pool.empty(), ErrorKind::kEmptyPool, "task pool is empty");
  require(pool.labeled(), ErrorKind::kSchema, "task pool must be labeled");
  if (cfg.task_pool.eoc_shift > 0.0) {
    SyntheticSpec shifted = *src.synthetic;
    shifted.condition_shift = cfg.task_pool.eoc_shift;
    if (cfg.task_pool.eoc_chips_per_class > 0) shifted.chips_per_class = cfg.task_pool.eoc_chips_per_class;
    DatasetPool eoc = generate_synthetic_pool(shifted, cfg.task_pool.eoc_seed);
    pool = concat_pools({std::move(pool), with_tag(std::move(eoc), tags::kCondition, tags::kEocTest)});
  }
  return pool;
}

DatasetPool load_pretrain_pool(const RunConfig& cfg) {
  require(cfg.pretrain_pool.has_value(), ErrorKind::kConfig, "config has no pretrain_pool section");
  DatasetPool pool = strip_labels(load_pool(cfg, *cfg.pretrain_pool));
  require(!pool.empty(), ErrorKind::kEmptyPool, "pretraining pool is empty");
  return pool;
}

}  // namespace sarfsl::cli
