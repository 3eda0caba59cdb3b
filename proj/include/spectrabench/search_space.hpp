#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

namespace spectrabench {

using ParamValue = std::variant<std::int64_t, double, std::string>;
using ParamMap = std::map<std::string, ParamValue>;

std::string to_string(const ParamValue& v);

/// Integer parameter in [lo, hi]; sampled as a real and rounded to the nearest integer.
struct IntRange {
    std::int64_t lo = 0;
    std::int64_t hi = 0;
    bool log = false;
};

/// Real parameter in [lo, hi], optionally on a log scale (lo > 0).
struct RealRange {
    double lo = 0.0;
    double hi = 1.0;
    bool log = false;
};

struct Categorical {
    std::vector<ParamValue> choices;
};

using Domain = std::variant<IntRange, RealRange, Categorical>;

/// Named parameter domains, iterated in name order.
struct SearchSpace {
    std::map<std::string, Domain> params;

    /// Throws ConfigError for empty ranges, empty choice sets, or non-positive log bounds.
    void validate() const;

    /// True when every parameter of the space is present in `p` and inside its domain.
    bool contains(const ParamMap& p) const;
};

}  // namespace spectrabench
