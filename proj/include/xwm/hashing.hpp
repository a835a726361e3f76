#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace xwm {

/// splitmix64 finalizer. Every hash in the toolkit is built from this mix so
/// that scores are bit-reproducible across platforms.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value) noexcept {
    return mix64(seed ^ mix64(value));
}

constexpr std::uint64_t fnv1a64(std::string_view bytes) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Child seed for a named stage or item. The scheme is
/// `mix64(parent ^ fnv1a64(label))`, so a rerun of one stage with the same
/// parent seed reproduces it independently of every other stage.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::string_view label) noexcept {
    return mix64(parent ^ fnv1a64(label));
}

/// Maps the top 53 bits of a 64-bit word to [0, 1).
constexpr double to_unit_interval(std::uint64_t bits) noexcept {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Counter-based generator: the i-th draw is mix64(key + i * golden). No
/// hidden state beyond the counter, so a stream can be replayed from its key.
class CounterRng {
public:
    explicit constexpr CounterRng(std::uint64_t key) noexcept : key_(key) {}

    constexpr std::uint64_t next() noexcept {
        return mix64(key_ + 0x9e3779b97f4a7c15ULL * ++counter_);
    }

    constexpr double uniform() noexcept { return to_unit_interval(next()); }

    /// Unbiased integer in [0, bound) by rejection.
    constexpr std::uint64_t below(std::uint64_t bound) noexcept {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        std::uint64_t r = next();
        while (r >= limit) r = next();
        return r % bound;
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

/// Standard normal draw (Box-Muller, one value per two uniforms) from a
/// counter stream; identical on every standard library.
double standard_normal(CounterRng& rng) noexcept;

/// Hex rendering used for checksums and config hashes in artifact files.
std::string to_hex(std::uint64_t value);

}  // namespace xwm
