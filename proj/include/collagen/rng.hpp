#pragma once

#include <cstdint>
#include <random>
#include <span>

#include "collagen/error.hpp"

namespace collagen {

/// (seed, stream_id) fully determines every draw made from a stream.
struct RngState {
    std::uint64_t seed = 0;
    std::uint64_t stream_id = 0;

    /// Independent sub-stream identified by `tag`; does not consume draws.
    RngState child(std::uint64_t tag) const;

    friend bool operator==(const RngState&, const RngState&) = default;
};

std::uint64_t splitmix64(std::uint64_t x);

/// Seeded generator with platform-independent distributions. The standard
/// library's distribution objects are implementation-defined, so every
/// mapping from raw bits to values is written out here.
class Rng {
public:
    explicit Rng(RngState state);

    RngState state() const { return state_; }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform on [0, n); n must be positive.
    std::uint64_t below(std::uint64_t n);

    /// Uniform on the closed range [lo, hi].
    int range(int lo, int hi);

    bool coin(double p = 0.5) { return uniform() < p; }

    /// Standard normal via Box-Muller (cosine branch only).
    double normal();

    template <typename T>
    const T& pick(std::span<const T> items) {
        if (items.empty()) throw Error("pick from empty set");
        return items[below(items.size())];
    }

private:
    RngState state_;
    std::mt19937_64 engine_;
};

}  // namespace collagen
