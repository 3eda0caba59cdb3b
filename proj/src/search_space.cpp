#include "spectrabench/search_space.hpp"

#include "spectrabench/error.hpp"

#include <cmath>
#include <cstdio>

namespace spectrabench {

std::string to_string(const ParamValue& v) {
    if (const auto* i = std::get_if<std::int64_t>(&v)) return std::to_string(*i);
    if (const auto* d = std::get_if<double>(&v)) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", *d);
        return buf;
    }
    return std::get<std::string>(v);
}

void SearchSpace::validate() const {
    for (const auto& [name, domain] : params) {
        if (const auto* r = std::get_if<IntRange>(&domain)) {
            if (r->lo > r->hi) throw ConfigError("empty integer range for " + name);
            if (r->log && r->lo <= 0) throw ConfigError("log range must be positive for " + name);
        } else if (const auto* r = std::get_if<RealRange>(&domain)) {
            if (!std::isfinite(r->lo) || !std::isfinite(r->hi) || r->lo > r->hi) {
                throw ConfigError("empty real range for " + name);
            }
            if (r->log && r->lo <= 0.0) throw ConfigError("log range must be positive for " + name);
        } else if (std::get<Categorical>(domain).choices.empty()) {
            throw ConfigError("empty choice set for " + name);
        }
    }
}

bool SearchSpace::contains(const ParamMap& p) const {
    for (const auto& [name, domain] : params) {
        const auto it = p.find(name);
        if (it == p.end()) return false;
        const auto& v = it->second;
        if (const auto* r = std::get_if<IntRange>(&domain)) {
            const auto* i = std::get_if<std::int64_t>(&v);
            if (!i || *i < r->lo || *i > r->hi) return false;
        } else if (const auto* r = std::get_if<RealRange>(&domain)) {
            double x = 0.0;
            if (const auto* d = std::get_if<double>(&v)) {
                x = *d;
            } else if (const auto* i = std::get_if<std::int64_t>(&v)) {
                x = static_cast<double>(*i);
            } else {
                return false;
            }
            if (!(x >= r->lo && x <= r->hi)) return false;
        } else {
            bool found = false;
            for (const auto& c : std::get<Categorical>(domain).choices) found = found || c == v;
            if (!found) return false;
        }
    }
    return true;
}

}  // namespace spectrabench
