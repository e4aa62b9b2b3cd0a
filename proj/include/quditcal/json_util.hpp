#pragma once

#include <initializer_list>
#include <string>

#include "json.hpp"

#include "quditcal/types.hpp"

namespace quditcal {

/// Throws ConfigError naming the first key of `j` not in `allowed`.
inline void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                                const std::string& context) {
  if (!j.is_object()) throw ConfigError(context + ": expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) throw ConfigError(context + ": unknown key '" + key + "'");
  }
}

template <typename T>
void read_if_present(const nlohmann::json& j, const char* key, T& out, const std::string& context) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(context + "." + key + ": " + e.what());
  }
}

}  // namespace quditcal
