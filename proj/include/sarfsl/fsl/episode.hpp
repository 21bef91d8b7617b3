#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "sarfsl/core/json.hpp"
#include "sarfsl/core/rng.hpp"
#include "sarfsl/data_io/chip.hpp"

namespace sarfsl::fsl {

struct EpisodeSpec {
  int ways = 5;
  int shots = 5;
  int query_per_class = 0;  // 0: every remaining chip of the query condition
  int holdout_count = 0;
  // Condition tag values; an empty string matches any chip.
  std::string support_condition = tags::kSocTrain;
  std::string query_condition = tags::kSocTest;
};

/// One M-way N-shot task. Chips are referenced by pool index; support and
/// query are class-major in episode-label order.
struct Episode {
  int ways = 0;
  int shots = 0;
  std::vector<std::size_t> support;
  std::vector<int> support_labels;  // episode labels in [0, ways)
  std::vector<std::size_t> query;
  std::vector<int> query_labels;
  std::vector<int> class_map;        // episode label -> pool class id
  std::vector<int> holdout_classes;  // pool class ids outside the label space
  std::vector<std::size_t> holdout_query;  // query-condition chips of holdout classes, capped like the query
};

/// Draws ways + holdout_count distinct classes (the first `ways` become the
/// label space, in draw order), then per ID class `shots` support chips from
/// the support condition and query chips from the query condition, disjoint.
/// Sampling error naming the deficit when classes or chips run short.
Episode sample_episode(const DatasetPool& pool, const EpisodeSpec& spec, Rng& rng);
Episode sample_episode(const DatasetPool& pool, int ways, int shots, int query_per_class,
                       int holdout_count, Rng& rng);

/// Replayable descriptor (pool indices and class assignment).
Json to_json(const Episode& episode);
Episode episode_from_json(const Json& j);

}  // namespace sarfsl::fsl
