#pragma once

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <initializer_list>
#include <set>
#include <string>

#include "isacfusion/error.hpp"

namespace isac::detail {

inline void reject_unknown(const nlohmann::json& obj, std::initializer_list<const char*> allowed,
                           const std::string& where) {
    if (!obj.is_object()) throw ValidationError(fmt::format("{}: expected an object", where));
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, _] : obj.items()) {
        if (!ok.contains(key)) throw ValidationError(fmt::format("{}: unknown key '{}'", where, key));
    }
}

template <typename T>
void read(const nlohmann::json& obj, const char* key, T& out) {
    if (obj.contains(key)) out = obj.at(key).get<T>();
}

}  // namespace isac::detail
