#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

namespace emasched {

using Json = nlohmann::json;

/// Config error carrying the dotted path of the offending field.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& path, const std::string& what)
      : std::runtime_error(path + ": " + what), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

inline std::string join_path(std::string_view parent, std::string_view key) {
  if (parent.empty()) return std::string(key);
  return std::string(parent) + "." + std::string(key);
}

/// Reads `obj[key]` as T when present, leaving `out` untouched otherwise.
template <typename T>
void read_field(const Json& obj, std::string_view key, T& out, std::string_view parent) {
  const std::string path = join_path(parent, key);
  if (!obj.is_object()) throw ConfigError(std::string(parent.empty() ? "<root>" : parent), "expected an object");
  auto it = obj.find(std::string(key));
  if (it == obj.end()) return;
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!it->is_boolean()) throw ConfigError(path, "expected a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!it->is_number_integer()) throw ConfigError(path, "expected an integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!it->is_number()) throw ConfigError(path, "expected a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!it->is_string()) throw ConfigError(path, "expected a string");
    }
    out = it->get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path, e.what());
  }
}

template <typename T>
T require_field(const Json& obj, std::string_view key, std::string_view parent) {
  if (!obj.is_object() || !obj.contains(std::string(key)))
    throw ConfigError(join_path(parent, key), "required field missing");
  T out{};
  read_field(obj, key, out, parent);
  return out;
}

}  // namespace emasched
