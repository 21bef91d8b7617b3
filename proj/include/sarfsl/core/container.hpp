#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "sarfsl/core/json.hpp"

namespace sarfsl {

// Versioned binary container used for checkpoints:
//   8-byte magic "SARFSLCK", uint32 version, uint64 header length,
//   UTF-8 JSON header, uint64 value count, float32 values (all little-endian).
// The header always carries "kind" so a head checkpoint cannot be mistaken for
// an encoder checkpoint.

inline constexpr std::uint32_t kContainerVersion = 1;

struct Container {
  std::string kind;
  Json header = Json::object();
  std::vector<float> values;
};

void save_container(const std::filesystem::path& path, const Container& container);
/// Throws a load error for missing files and a schema error for corrupt or
/// mismatched contents.
Container load_container(const std::filesystem::path& path, const std::string& expected_kind);

}  // namespace sarfsl
