#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <span>
#include <string_view>

namespace dynprior {

namespace detail {

inline constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
}

}  // namespace detail

/// 64-bit FNV-1a; used to turn textual labels (policy names) into stream ids.
inline constexpr std::uint64_t fnv1a64(std::string_view text) noexcept {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

/// A reproducible random stream identified by (seed, stream id).
///
/// The generator is xoshiro256** whose state is derived by folding the seed and
/// every stream-id component through splitmix64. Equal (seed, id) pairs give
/// equal sequences regardless of which thread or in which order they run, so
/// each logical task (grid row, replication) should own its own stream.
class RngStream {
public:
    using result_type = std::uint64_t;

    RngStream(std::uint64_t seed, std::initializer_list<std::uint64_t> stream_id)
        : RngStream(seed, std::span<const std::uint64_t>(stream_id.begin(), stream_id.size())) {}

    RngStream(std::uint64_t seed, std::span<const std::uint64_t> stream_id) {
        std::uint64_t mix = seed;
        std::uint64_t key = detail::splitmix64(mix);
        for (std::uint64_t id : stream_id) {
            std::uint64_t m = key ^ id;
            key = detail::splitmix64(m) ^ detail::rotl(key, 23);
        }
        std::uint64_t sm = key;
        for (auto& word : state_) word = detail::splitmix64(sm);
        if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = 1;
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        const std::uint64_t result = detail::rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = detail::rotl(state_[3], 45);
        return result;
    }

    /// Uniform draw on the open interval (0, 1).
    double uniform() noexcept {
        return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal draw (Marsaglia polar method, second variate cached).
    double normal() noexcept {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u = 0.0, v = 0.0, s = 0.0;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double m = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * m;
        has_spare_ = true;
        return u * m;
    }

    friend bool operator==(const RngStream&, const RngStream&) = default;

private:
    std::array<std::uint64_t, 4> state_{};
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Stream-id namespaces so the harnesses never collide on a derived stream.
enum class StreamTag : std::uint64_t {
    Validation = 0x56414C,  // "VAL"
    Simulation = 0x53494D,  // "SIM"
    PriorCheck = 0x505249,  // "PRI"
};

}  // namespace dynprior
