#pragma once

#include <set>
#include <string>

#include <json.hpp>

#include "ltcs/errors.hpp"

namespace ltcs {

using json = nlohmann::ordered_json;

// Strict-schema helpers: unknown keys are configuration errors, required
// keys must be present, optional keys fall back to the given default.
inline void reject_unknown_keys(const json& j, const std::set<std::string>& allowed,
                                const std::string& context) {
    if (!j.is_object()) throw ConfigError(context + ": expected an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!allowed.count(it.key())) {
            throw ConfigError(context + ": unknown field '" + it.key() + "'");
        }
    }
}

template <typename T>
T require_field(const json& j, const std::string& key, const std::string& context) {
    if (!j.contains(key)) throw ConfigError(context + ": missing field '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(context + ": field '" + key + "': " + e.what());
    }
}

template <typename T>
T optional_field(const json& j, const std::string& key, const T& fallback,
                 const std::string& context) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(context + ": field '" + key + "': " + e.what());
    }
}

}  // namespace ltcs
