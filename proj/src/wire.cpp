#include "fedmae/wire.hpp"

#include <bit>
#include <cstring>
#include <string>

#include "fedmae/checksum.hpp"
#include "fedmae/errors.hpp"

namespace fedmae {
namespace {

static_assert(std::endian::native == std::endian::little,
              "wire format assumes a little-endian host");

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
T get(const std::vector<std::uint8_t>& in, std::size_t& pos) {
    if (pos + sizeof(T) > in.size())
        throw TruncatedMessageError("update message truncated at byte " + std::to_string(pos));
    T v;
    std::memcpy(&v, in.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

std::uint64_t body_checksum(const UpdateMessage& m) {
    std::vector<std::uint8_t> body;
    body.reserve(32 + m.delta.size() * sizeof(double));
    put(body, m.version);
    put(body, m.round);
    put(body, m.node_id);
    put(body, m.n_k);
    put(body, static_cast<std::uint64_t>(m.delta.size()));
    for (double d : m.delta) put(body, d);
    return fnv1a64(body.data(), body.size());
}

}  // namespace

UpdateMessage encode_update(const ClientUpdate& u, std::uint64_t round, std::uint32_t version) {
    if (u.delta.values.empty())
        throw std::invalid_argument("encode_update: zero-length delta");
    UpdateMessage m;
    m.version = version;
    m.round = round;
    m.node_id = u.node_id;
    m.n_k = u.sample_count;
    m.delta = u.delta.values;
    m.checksum = body_checksum(m);
    return m;
}

std::vector<std::uint8_t> serialize_message(const UpdateMessage& m) {
    std::vector<std::uint8_t> out;
    out.reserve(40 + m.delta.size() * sizeof(double));
    put(out, m.version);
    put(out, m.round);
    put(out, m.node_id);
    put(out, m.n_k);
    put(out, static_cast<std::uint64_t>(m.delta.size()));
    for (double d : m.delta) put(out, d);
    put(out, m.checksum);
    return out;
}

UpdateMessage parse_message(const std::vector<std::uint8_t>& bytes) {
    std::size_t pos = 0;
    UpdateMessage m;
    m.version = get<std::uint32_t>(bytes, pos);
    if (m.version != kProtocolVersion)
        throw VersionMismatchError("update message version " + std::to_string(m.version) +
                                   ", expected " + std::to_string(kProtocolVersion));
    m.round = get<std::uint64_t>(bytes, pos);
    m.node_id = get<std::int32_t>(bytes, pos);
    m.n_k = get<std::uint64_t>(bytes, pos);
    const auto len = get<std::uint64_t>(bytes, pos);
    // Divide instead of multiplying so a corrupted length cannot overflow.
    const std::uint64_t room = bytes.size() - pos;
    if (room < sizeof(std::uint64_t) ||
        len > (room - sizeof(std::uint64_t)) / sizeof(double))
        throw TruncatedMessageError("update message shorter than its declared payload");
    m.delta.resize(len);
    for (auto& d : m.delta) d = get<double>(bytes, pos);
    m.checksum = get<std::uint64_t>(bytes, pos);
    if (pos != bytes.size())
        throw TruncatedMessageError("update message has trailing bytes");
    if (m.checksum != body_checksum(m))
        throw ChecksumError("update message checksum mismatch from node " +
                            std::to_string(m.node_id) + " at round " + std::to_string(m.round));
    return m;
}

ClientUpdate decode_update(const UpdateMessage& m) {
    if (m.checksum != body_checksum(m))
        throw ChecksumError("update message checksum mismatch from node " +
                            std::to_string(m.node_id) + " at round " + std::to_string(m.round));
    ClientUpdate u;
    u.node_id = m.node_id;
    u.sample_count = m.n_k;
    u.delta.values = m.delta;
    return u;
}

}  // namespace fedmae
