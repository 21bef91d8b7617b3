#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace sarfsl {

/// Single-channel magnitude image, row-major. Pool-level code expects values
/// in [0, 1] and at least kMinChipSide pixels per side; individual transforms
/// accept any non-empty chip.
struct Chip {
  int height = 0;
  int width = 0;
  std::vector<float> pixels;

  Chip() = default;
  Chip(int h, int w, float fill = 0.0f)
      : height(h), width(w), pixels(static_cast<std::size_t>(h) * w, fill) {}
  Chip(int h, int w, std::vector<float> values);

  std::size_t size() const { return pixels.size(); }
  float& at(int row, int col) { return pixels[static_cast<std::size_t>(row) * width + col]; }
  float at(int row, int col) const { return pixels[static_cast<std::size_t>(row) * width + col]; }
  float max_value() const;
  float min_value() const;
  bool operator==(const Chip&) const = default;
};

inline constexpr int kMinChipSide = 16;

bool in_unit_range(const Chip& chip);
/// Exact-content fingerprint; two chips collide only if every pixel matches.
std::uint64_t chip_fingerprint(const Chip& chip);

using TagMap = std::map<std::string, std::string>;

namespace tags {
inline constexpr const char* kCondition = "condition";
inline constexpr const char* kSource = "source";
inline constexpr const char* kSocTrain = "SOC-train";
inline constexpr const char* kSocTest = "SOC-test";
inline constexpr const char* kEocTest = "EOC-test";
}  // namespace tags

/// Chips with optional labels and per-chip tags.
struct DatasetPool {
  std::vector<Chip> chips;
  std::optional<std::vector<int>> labels;
  std::vector<TagMap> tags;  // one entry per chip
  std::vector<std::string> class_names;

  std::size_t size() const { return chips.size(); }
  bool empty() const { return chips.empty(); }
  bool labeled() const { return labels.has_value(); }
  /// max(label) + 1 (or class_names.size() if larger); 0 when unlabeled.
  int num_classes() const;
  /// Tag value, or "" when absent.
  std::string tag(std::size_t index, const std::string& key) const;

  /// Throws a schema error when a structural invariant is broken.
  void validate() const;
};

/// Concatenates pools; labels are kept only when every input is labeled.
DatasetPool concat_pools(const std::vector<DatasetPool>& pools);
DatasetPool strip_labels(DatasetPool pool);
/// Sets tag `key` to `value` on every chip.
DatasetPool with_tag(DatasetPool pool, const std::string& key, const std::string& value);

}  // namespace sarfsl
