#include "fedmae/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace fedmae {

namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x) {
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}

}  // namespace

SeededRng::SeededRng(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream), base_(mix64(seed + kGolden) ^ mix64(stream * kGolden + 1)) {}

SeededRng SeededRng::derive(std::uint64_t substream) const {
    return SeededRng(seed_, mix64(stream_ * kGolden + substream) + substream);
}

std::uint64_t SeededRng::next_u64() {
    return mix64(base_ + kGolden * ++counter_);
}

double SeededRng::next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double SeededRng::uniform(double lo, double hi) {
    return lo + (hi - lo) * next_double();
}

double SeededRng::next_gaussian() {
    // u in (0, 1] so the log is finite.
    double u = 1.0 - next_double();
    double v = next_double();
    return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * std::numbers::pi * v);
}

std::uint64_t SeededRng::next_below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("next_below: n must be positive");
    // Rejection sampling on the top bits keeps the draw unbiased.
    std::uint64_t limit = ~std::uint64_t{0} - ~std::uint64_t{0} % n;
    std::uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return x % n;
}

}  // namespace fedmae
