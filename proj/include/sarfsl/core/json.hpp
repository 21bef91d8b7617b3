#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>
#include "sarfsl/core/error.hpp"

namespace sarfsl {

using Json = nlohmann::json;

/// Strict reader over one JSON object. Every key must be consumed through
/// get()/child() before finish(), otherwise the leftovers are reported as
/// unknown keys. Type mismatches and unknown keys raise config errors that
/// carry the dotted key path.
class JsonReader {
 public:
  JsonReader(const Json& object, std::string path);

  bool has(const std::string& key) const { return object_.contains(key); }
  const std::string& path() const { return path_; }
  std::string key_path(const std::string& key) const;

  void get(const std::string& key, int& out);
  void get(const std::string& key, std::int64_t& out);
  void get(const std::string& key, std::uint64_t& out);
  void get(const std::string& key, double& out);
  void get(const std::string& key, bool& out);
  void get(const std::string& key, std::string& out);
  void get(const std::string& key, std::pair<double, double>& out);
  void get(const std::string& key, std::pair<int, int>& out);
  void get(const std::string& key, std::vector<int>& out);
  void get(const std::string& key, std::vector<double>& out);
  void get(const std::string& key, std::vector<std::string>& out);
  void get(const std::string& key, std::map<std::string, double>& out);

  /// Nested value, or nullptr when absent or null. Marks the key as consumed.
  const Json* child(const std::string& key);

  void finish() const;

 private:
  const Json& take(const std::string& key);

  const Json& object_;
  std::string path_;
  std::set<std::string> consumed_;
};

/// Parses JSON text; syntax errors become config errors naming `origin`.
Json parse_json(const std::string& text, const std::string& origin);

/// Applies "dotted.key=value" assignments to a JSON document. The value is
/// parsed as JSON when possible and taken as a plain string otherwise.
void apply_override(Json& doc, const std::string& assignment);

}  // namespace sarfsl
