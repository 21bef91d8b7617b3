#include "sarfsl/fsl/episode.hpp"

#include <algorithm>

#include "sarfsl/core/error.hpp"

namespace sarfsl::fsl {

namespace {

bool matches(const DatasetPool& pool, std::size_t i, const std::string& condition) {
  return condition.empty() || pool.tag(i, tags::kCondition) == condition;
}

std::string describe_class(const DatasetPool& pool, int c) {
  std::string s = "class " + std::to_string(c);
  if (static_cast<std::size_t>(c) < pool.class_names.size()) s += " ('" + pool.class_names[c] + "')";
  return s;
}

std::string describe_condition(const std::string& condition) {
  return condition.empty() ? "chips" : "chips tagged " + condition;
}

}  // namespace

Episode sample_episode(const DatasetPool& pool, const EpisodeSpec& spec, Rng& rng) {
  require(pool.labeled(), ErrorKind::kSampling, "episode sampling needs a labeled pool");
  require(spec.ways >= 2 && spec.shots >= 1 && spec.query_per_class >= 0 && spec.holdout_count >= 0,
          ErrorKind::kParameter, "episode: need ways >= 2, shots >= 1, query_per_class >= 0, holdout_count >= 0");

  const int num_classes = pool.num_classes();
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(num_classes));
  for (std::size_t i = 0; i < pool.size(); ++i) by_class[(*pool.labels)[i]].push_back(i);
  std::vector<int> present;
  for (int c = 0; c < num_classes; ++c) {
    if (!by_class[c].empty()) present.push_back(c);
  }
  const int needed = spec.ways + spec.holdout_count;
  require(static_cast<int>(present.size()) >= needed, ErrorKind::kSampling,
          "episode needs " + std::to_string(needed) + " classes (" + std::to_string(spec.ways) + " ways + " +
              std::to_string(spec.holdout_count) + " holdout), pool has " + std::to_string(present.size()));

  rng.shuffle(present);
  Episode ep;
  ep.ways = spec.ways;
  ep.shots = spec.shots;
  ep.class_map.assign(present.begin(), present.begin() + spec.ways);
  ep.holdout_classes.assign(present.begin() + spec.ways, present.begin() + needed);

  const bool shared = spec.support_condition.empty() || spec.query_condition.empty() ||
                      spec.support_condition == spec.query_condition;
  for (int label = 0; label < spec.ways; ++label) {
    const int c = ep.class_map[label];
    std::vector<std::size_t> support_pool;
    std::vector<std::size_t> query_pool;
    for (std::size_t i : by_class[c]) {
      if (matches(pool, i, spec.support_condition)) support_pool.push_back(i);
      if (!shared && matches(pool, i, spec.query_condition)) query_pool.push_back(i);
    }
    rng.shuffle(support_pool);
    if (shared) {
      // One candidate list serves both splits; restrict it to chips matching
      // both conditions so the query condition is honoured too.
      std::erase_if(support_pool, [&](std::size_t i) { return !matches(pool, i, spec.query_condition); });
      require(support_pool.size() >= static_cast<std::size_t>(spec.shots + std::max(1, spec.query_per_class)),
              ErrorKind::kSampling,
              describe_class(pool, c) + " has " + std::to_string(support_pool.size()) + " " +
                  describe_condition(spec.support_condition) + ", need " +
                  std::to_string(spec.shots + std::max(1, spec.query_per_class)) + " for support and query");
      query_pool.assign(support_pool.begin() + spec.shots, support_pool.end());
      support_pool.resize(static_cast<std::size_t>(spec.shots));
    } else {
      require(support_pool.size() >= static_cast<std::size_t>(spec.shots), ErrorKind::kSampling,
              describe_class(pool, c) + " has " + std::to_string(support_pool.size()) + " " +
                  describe_condition(spec.support_condition) + ", need " + std::to_string(spec.shots));
      support_pool.resize(static_cast<std::size_t>(spec.shots));
      rng.shuffle(query_pool);
      require(query_pool.size() >= static_cast<std::size_t>(std::max(1, spec.query_per_class)),
              ErrorKind::kSampling,
              describe_class(pool, c) + " has " + std::to_string(query_pool.size()) + " " +
                  describe_condition(spec.query_condition) + ", need " +
                  std::to_string(std::max(1, spec.query_per_class)) + " for the query set");
    }
    if (spec.query_per_class > 0) query_pool.resize(static_cast<std::size_t>(spec.query_per_class));
    for (std::size_t i : support_pool) {
      ep.support.push_back(i);
      ep.support_labels.push_back(label);
    }
    for (std::size_t i : query_pool) {
      ep.query.push_back(i);
      ep.query_labels.push_back(label);
    }
  }
  for (int c : ep.holdout_classes) {
    std::vector<std::size_t> chips;
    for (std::size_t i : by_class[c]) {
      if (matches(pool, i, spec.query_condition)) chips.push_back(i);
    }
    rng.shuffle(chips);
    if (spec.query_per_class > 0 && chips.size() > static_cast<std::size_t>(spec.query_per_class)) {
      chips.resize(static_cast<std::size_t>(spec.query_per_class));
    }
    ep.holdout_query.insert(ep.holdout_query.end(), chips.begin(), chips.end());
  }
  return ep;
}

Episode sample_episode(const DatasetPool& pool, int ways, int shots, int query_per_class, int holdout_count,
                       Rng& rng) {
  EpisodeSpec spec;
  spec.ways = ways;
  spec.shots = shots;
  spec.query_per_class = query_per_class;
  spec.holdout_count = holdout_count;
  return sample_episode(pool, spec, rng);
}

Json to_json(const Episode& e) {
  return Json{{"ways", e.ways},
              {"shots", e.shots},
              {"class_map", e.class_map},
              {"holdout_classes", e.holdout_classes},
              {"support", e.support},
              {"support_labels", e.support_labels},
              {"query", e.query},
              {"query_labels", e.query_labels},
              {"holdout_query", e.holdout_query}};
}

Episode episode_from_json(const Json& j) {
  Episode e;
  try {
    j.at("ways").get_to(e.ways);
    j.at("shots").get_to(e.shots);
    j.at("class_map").get_to(e.class_map);
    j.at("holdout_classes").get_to(e.holdout_classes);
    j.at("support").get_to(e.support);
    j.at("support_labels").get_to(e.support_labels);
    j.at("query").get_to(e.query);
    j.at("query_labels").get_to(e.query_labels);
    j.at("holdout_query").get_to(e.holdout_query);
  } catch (const Json::exception& ex) {
    fail(ErrorKind::kSchema, std::string("episode descriptor: ") + ex.what());
  }
  require(e.support.size() == e.support_labels.size() && e.query.size() == e.query_labels.size(),
          ErrorKind::kSchema, "episode descriptor: index and label lists differ in length");
  return e;
}

}  // namespace sarfsl::fsl
