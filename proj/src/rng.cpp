#include "collagen/rng.hpp"

#include <cmath>
#include <numbers>

namespace collagen {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

RngState RngState::child(std::uint64_t tag) const {
    return {splitmix64(seed ^ splitmix64(tag + 0x632BE59BD9B4E019ull)), stream_id};
}

Rng::Rng(RngState state)
    : state_(state), engine_(splitmix64(splitmix64(state.seed) + splitmix64(~state.stream_id))) {}

std::uint64_t Rng::below(std::uint64_t n) {
    if (n == 0) throw Error("Rng::below requires n > 0");
    // Reject the short final bucket so every residue is equally likely.
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
        const std::uint64_t r = next_u64();
        if (r >= threshold) return r % n;
    }
}

int Rng::range(int lo, int hi) {
    if (hi < lo) throw Error("Rng::range with hi < lo");
    const auto span = static_cast<std::uint64_t>(static_cast<std::int64_t>(hi) - lo) + 1;
    return static_cast<int>(lo + static_cast<std::int64_t>(below(span)));
}

double Rng::normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace collagen
