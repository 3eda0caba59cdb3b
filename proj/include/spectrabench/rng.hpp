#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

namespace spectrabench {

/// Seeded random source with platform-independent draws.
///
/// std::mt19937_64 output is fully specified by the standard, but the std
/// distributions are not, so uniform/normal/integer draws are derived here from
/// raw engine bits. Reports stay byte-identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform in (0, 1).
    double uniform_open() {
        double u;
        do {
            u = uniform();
        } while (u == 0.0);
        return u;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). n must be > 0.
    std::uint64_t below(std::uint64_t n);

    /// Standard normal via Box-Muller.
    double normal();

    double normal(double mean, double sd) { return mean + sd * normal(); }

    /// Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    /// k distinct indices drawn from [0, n) (partial Fisher-Yates), in draw order.
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// One component of a seed derivation path: an integer index or a label.
struct SeedPart {
    template <typename T>
        requires std::is_integral_v<T>
    SeedPart(T n) : value(static_cast<std::uint64_t>(n)) {}
    SeedPart(std::string_view s) : value(s) {}
    SeedPart(const char* s) : value(std::string_view(s)) {}
    SeedPart(const std::string& s) : value(std::string_view(s)) {}

    std::variant<std::uint64_t, std::string_view> value;
};

/// Mixes a base seed with a path of labels/indices into a child seed
/// (splitmix64 finalizer over FNV-1a string hashes). Work units seeded this way
/// produce the same results regardless of scheduling.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<SeedPart> parts);

/// FNV-1a 64-bit hash of bytes.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL);

}  // namespace spectrabench
