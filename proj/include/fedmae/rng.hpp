#pragma once

#include <cstdint>
#include <vector>

namespace fedmae {

// Counter-based deterministic generator: value = mix(seed, stream, counter).
// Identical (seed, stream) pairs produce identical sequences on every
// platform, and distinct streams derived from one master seed are
// statistically independent. There is no shared state, so streams can be
// handed to concurrent workers freely.
class SeededRng {
  public:
    SeededRng(std::uint64_t seed, std::uint64_t stream);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }
    std::uint64_t counter() const { return counter_; }
    void set_counter(std::uint64_t c) { counter_ = c; }

    // Child generator on an independent stream. Chainable:
    // rng.derive(a).derive(b) and rng.derive(b).derive(a) differ.
    SeededRng derive(std::uint64_t substream) const;

    std::uint64_t next_u64();

    // Uniform in [0, 1) with 53 random bits.
    double next_double();

    // Uniform in [lo, hi).
    double uniform(double lo, double hi);

    // Standard normal via Box-Muller (two draws per call, no caching,
    // so the consumed-counter count stays predictable).
    double next_gaussian();

    // Unbiased uniform integer in [0, n); n must be positive.
    std::uint64_t next_below(std::uint64_t n);

    // Fisher-Yates; deterministic for a given (seed, stream, counter).
    template <typename T>
    void shuffle(std::vector<T>& xs) {
        if (xs.size() < 2) return;
        for (std::size_t i = xs.size() - 1; i > 0; --i) {
            std::size_t j = static_cast<std::size_t>(next_below(i + 1));
            std::swap(xs[i], xs[j]);
        }
    }

  private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t base_;
    std::uint64_t counter_ = 0;
};

// Stream tags for the purposes a federation run draws randomness for.
// Every stream is a pure function of (master seed, tag chain), which is what
// makes checkpoint resume exact: no generator state survives a round.
namespace streams {
inline constexpr std::uint64_t kInit = 1;
inline constexpr std::uint64_t kSynth = 2;
inline constexpr std::uint64_t kSplit = 3;
inline constexpr std::uint64_t kLocal = 4;   // derive(kLocal).derive(round).derive(node)
inline constexpr std::uint64_t kEval = 5;
inline constexpr std::uint64_t kFault = 6;   // derive(kFault).derive(round).derive(node)
inline constexpr std::uint64_t kProbe = 7;
}  // namespace streams

}  // namespace fedmae
