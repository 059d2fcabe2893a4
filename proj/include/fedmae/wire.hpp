#pragma once

#include <cstdint>
#include <vector>

#include "fedmae/trainer.hpp"

namespace fedmae {

inline constexpr std::uint32_t kProtocolVersion = 1;

// Wire framing for one client update. Byte layout, little-endian:
//   u32 version | u64 round | i32 node_id | u64 n_k | u64 len |
//   len x f64 delta | u64 fnv1a64 over all preceding bytes
struct UpdateMessage {
    std::uint32_t version = kProtocolVersion;
    std::uint64_t round = 0;
    std::int32_t node_id = 0;
    std::uint64_t n_k = 0;
    std::vector<double> delta;
    std::uint64_t checksum = 0;

    bool operator==(const UpdateMessage&) const = default;
};

UpdateMessage encode_update(const ClientUpdate& u, std::uint64_t round,
                            std::uint32_t version = kProtocolVersion);

std::vector<std::uint8_t> serialize_message(const UpdateMessage& m);

// Throws TruncatedMessageError / VersionMismatchError / ChecksumError; the
// checksum error names node and round.
UpdateMessage parse_message(const std::vector<std::uint8_t>& bytes);

// Validates the checksum and returns the embedded ClientUpdate (loss traces
// do not travel on the wire).
ClientUpdate decode_update(const UpdateMessage& m);

}  // namespace fedmae
