#include "sarfsl/data_io/chip.hpp"

#include <algorithm>

#include "sarfsl/core/error.hpp"
#include "sarfsl/core/io.hpp"

namespace sarfsl {

Chip::Chip(int h, int w, std::vector<float> values) : height(h), width(w), pixels(std::move(values)) {
  require(h >= 1 && w >= 1 && pixels.size() == static_cast<std::size_t>(h) * w, ErrorKind::kShape,
          "chip: " + std::to_string(pixels.size()) + " values for a " + std::to_string(h) + "x" +
              std::to_string(w) + " chip");
}

float Chip::max_value() const {
  return pixels.empty() ? 0.0f : *std::max_element(pixels.begin(), pixels.end());
}

float Chip::min_value() const {
  return pixels.empty() ? 0.0f : *std::min_element(pixels.begin(), pixels.end());
}

bool in_unit_range(const Chip& chip) {
  return std::all_of(chip.pixels.begin(), chip.pixels.end(),
                     [](float v) { return v >= 0.0f && v <= 1.0f; });
}

std::uint64_t chip_fingerprint(const Chip& chip) {
  const std::int32_t dims[2] = {chip.height, chip.width};
  std::uint64_t h = fnv1a(dims, sizeof(dims));
  return fnv1a(chip.pixels.data(), chip.pixels.size() * sizeof(float), h);
}

int DatasetPool::num_classes() const {
  int n = static_cast<int>(class_names.size());
  if (labels) {
    for (int label : *labels) n = std::max(n, label + 1);
  }
  return labeled() ? n : 0;
}

std::string DatasetPool::tag(std::size_t index, const std::string& key) const {
  if (index >= tags.size()) return {};
  auto it = tags[index].find(key);
  return it == tags[index].end() ? std::string{} : it->second;
}

void DatasetPool::validate() const {
  require(tags.size() == chips.size(), ErrorKind::kSchema,
          "pool: " + std::to_string(tags.size()) + " tag maps for " + std::to_string(chips.size()) +
              " chips");
  if (labels) {
    require(labels->size() == chips.size(), ErrorKind::kSchema,
            "pool: " + std::to_string(labels->size()) + " labels for " +
                std::to_string(chips.size()) + " chips");
    const int classes = num_classes();
    for (int label : *labels) {
      require(label >= 0 && label < classes, ErrorKind::kSchema,
              "pool: label " + std::to_string(label) + " out of range");
    }
  }
}

DatasetPool concat_pools(const std::vector<DatasetPool>& pools) {
  DatasetPool out;
  bool all_labeled = !pools.empty();
  for (const auto& p : pools) all_labeled = all_labeled && p.labeled();
  if (all_labeled) out.labels.emplace();
  for (const auto& p : pools) {
    out.chips.insert(out.chips.end(), p.chips.begin(), p.chips.end());
    out.tags.insert(out.tags.end(), p.tags.begin(), p.tags.end());
    if (all_labeled) out.labels->insert(out.labels->end(), p.labels->begin(), p.labels->end());
    if (p.class_names.size() > out.class_names.size()) out.class_names = p.class_names;
  }
  return out;
}

DatasetPool strip_labels(DatasetPool pool) {
  pool.labels.reset();
  pool.class_names.clear();
  return pool;
}

DatasetPool with_tag(DatasetPool pool, const std::string& key, const std::string& value) {
  pool.tags.resize(pool.chips.size());
  for (TagMap& t : pool.tags) t[key] = value;
  return pool;
}

}  // namespace sarfsl
