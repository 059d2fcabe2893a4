#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace fedmae {

// FNV-1a, 64-bit. Used for wire payloads, checkpoint files and model
// fingerprints; the value is part of the on-disk formats, do not change.
inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

inline std::uint64_t fnv1a64(std::span<const std::byte> bytes,
                             std::uint64_t state = kFnvOffset) {
    for (std::byte b : bytes) {
        state ^= static_cast<std::uint64_t>(b);
        state *= kFnvPrime;
    }
    return state;
}

inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t state = kFnvOffset) {
    return fnv1a64(std::span(static_cast<const std::byte*>(data), n), state);
}

// Checksum of a double sequence via its little-endian byte image.
inline std::uint64_t checksum_doubles(std::span<const double> xs) {
    static_assert(std::endian::native == std::endian::little,
                  "big-endian hosts need byte swaps here");
    return fnv1a64(xs.data(), xs.size() * sizeof(double));
}

}  // namespace fedmae
