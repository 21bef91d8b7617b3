#include "sarfsl/core/json.hpp"

namespace sarfsl {

namespace {

[[noreturn]] void type_error(const std::string& key_path, const char* expected) {
  fail(ErrorKind::kConfig, key_path + ": expected " + expected);
}

double as_number(const Json& v, const std::string& key_path) {
  if (!v.is_number()) type_error(key_path, "a number");
  return v.get<double>();
}

std::int64_t as_integer(const Json& v, const std::string& key_path) {
  if (!v.is_number_integer()) type_error(key_path, "an integer");
  return v.get<std::int64_t>();
}

}  // namespace

JsonReader::JsonReader(const Json& object, std::string path)
    : object_(object), path_(std::move(path)) {
  if (!object_.is_object()) type_error(path_.empty() ? "<root>" : path_, "an object");
}

std::string JsonReader::key_path(const std::string& key) const {
  return path_.empty() ? key : path_ + "." + key;
}

const Json& JsonReader::take(const std::string& key) {
  consumed_.insert(key);
  return object_.at(key);
}

void JsonReader::get(const std::string& key, int& out) {
  if (!has(key)) return;
  const std::int64_t v = as_integer(take(key), key_path(key));
  require(v >= INT32_MIN && v <= INT32_MAX, ErrorKind::kConfig, key_path(key) + ": out of range");
  out = static_cast<int>(v);
}

void JsonReader::get(const std::string& key, std::int64_t& out) {
  if (has(key)) out = as_integer(take(key), key_path(key));
}

void JsonReader::get(const std::string& key, std::uint64_t& out) {
  if (!has(key)) return;
  const Json& v = take(key);
  if (v.is_number_unsigned()) {
    out = v.get<std::uint64_t>();
    return;
  }
  const std::int64_t s = as_integer(v, key_path(key));
  require(s >= 0, ErrorKind::kConfig, key_path(key) + ": must be non-negative");
  out = static_cast<std::uint64_t>(s);
}

void JsonReader::get(const std::string& key, double& out) {
  if (has(key)) out = as_number(take(key), key_path(key));
}

void JsonReader::get(const std::string& key, bool& out) {
  if (!has(key)) return;
  const Json& v = take(key);
  if (!v.is_boolean()) type_error(key_path(key), "true or false");
  out = v.get<bool>();
}

void JsonReader::get(const std::string& key, std::string& out) {
  if (!has(key)) return;
  const Json& v = take(key);
  if (!v.is_string()) type_error(key_path(key), "a string");
  out = v.get<std::string>();
}

void JsonReader::get(const std::string& key, std::pair<double, double>& out) {
  if (!has(key)) return;
  const Json& v = take(key);
  if (!v.is_array() || v.size() != 2) type_error(key_path(key), "a two-element array");
  out = {as_number(v[0], key_path(key)), as_number(v[1], key_path(key))};
}

void JsonReader::get(const std::string& key, std::pair<int, int>& out) {
  if (!has(key)) return;
  const Json& v = take(key);
  if (!v.is_array() || v.size() != 2) type_error(key_path(key), "a two-element array");
  out = {static_cast<int>(as_integer(v[0], key_path(key))),
         static_cast<int>(as_integer(v[1], key_path(key)))};
}

void JsonReader::get(const std::string& key, std::vector<int>& out) {
  if (!has(key)) return;
  const Json& v = take(key);
  if (!v.is_array()) type_error(key_path(key), "an array of integers");
  out.clear();
  for (const Json& e : v) out.push_back(static_cast<int>(as_integer(e, key_path(key))));
}

void JsonReader::get(const std::string& key, std::vector<double>& out) {
  if (!has(key)) return;
  const Json& v = take(key);
  if (!v.is_array()) type_error(key_path(key), "an array of numbers");
  out.clear();
  for (const Json& e : v) out.push_back(as_number(e, key_path(key)));
}

void JsonReader::get(const std::string& key, std::vector<std::string>& out) {
  if (!has(key)) return;
  const Json& v = take(key);
  if (!v.is_array()) type_error(key_path(key), "an array of strings");
  out.clear();
  for (const Json& e : v) {
    if (!e.is_string()) type_error(key_path(key), "an array of strings");
    out.push_back(e.get<std::string>());
  }
}

void JsonReader::get(const std::string& key, std::map<std::string, double>& out) {
  if (!has(key)) return;
  const Json& v = take(key);
  if (!v.is_object()) type_error(key_path(key), "an object of numbers");
  // Entries merge into the defaults so a config can override one probability.
  for (const auto& [name, value] : v.items()) out[name] = as_number(value, key_path(key) + "." + name);
}

const Json* JsonReader::child(const std::string& key) {
  if (!has(key)) return nullptr;
  const Json& v = take(key);
  return v.is_null() ? nullptr : &v;
}

void JsonReader::finish() const {
  for (const auto& [key, value] : object_.items()) {
    (void)value;
    if (!consumed_.count(key)) fail(ErrorKind::kConfig, "unknown key: " + key_path(key));
  }
}

Json parse_json(const std::string& text, const std::string& origin) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    fail(ErrorKind::kConfig, origin + ": " + e.what());
  }
}

void apply_override(Json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  require(eq != std::string::npos && eq > 0, ErrorKind::kConfig,
          "override must look like key.path=value: " + assignment);
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  Json value;
  try {
    value = Json::parse(text);
  } catch (const Json::parse_error&) {
    value = text;
  }
  Json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    require(!part.empty(), ErrorKind::kConfig, "override has an empty key segment: " + key);
    if (!node->is_object()) fail(ErrorKind::kConfig, "override path crosses a non-object: " + key);
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = Json::object();
    start = dot + 1;
  }
}

}  // namespace sarfsl
