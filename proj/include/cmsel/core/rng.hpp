#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace cmsel {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Stable child seed from a parent seed and a sequence of integer/string labels.
/// Used so that every unit of work gets a seed that does not depend on scheduling.
class SeedSeq {
public:
    explicit SeedSeq(std::uint64_t base) : state_(splitmix64(base)) {}

    SeedSeq& mix(std::uint64_t v) {
        state_ = splitmix64(state_ ^ splitmix64(v + 0x632be59bd9b4e019ULL));
        return *this;
    }
    SeedSeq& mix(std::string_view s) { return mix(fnv1a(s)); }

    [[nodiscard]] std::uint64_t value() const { return state_; }
    [[nodiscard]] Rng rng() const { return Rng(state_); }

private:
    std::uint64_t state_;
};

template <typename... Labels>
std::uint64_t derive_seed(std::uint64_t base, const Labels&... labels) {
    SeedSeq s(base);
    (s.mix(labels), ...);
    return s.value();
}

}  // namespace cmsel
