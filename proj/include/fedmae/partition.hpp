#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "fedmae/rng.hpp"

namespace fedmae {

using SampleId = std::uint32_t;

struct DatasetPool {
    char domain = 'A';  // 'A' or 'B'
    std::vector<SampleId> ids;  // unique within and across pools
};

// Five clients (index 0..4 = client 1..5) plus one server shard.
struct SplitAssignment {
    std::vector<std::vector<SampleId>> clients;
    std::vector<SampleId> server;
    std::vector<SampleId> leftover;

    // Disjointness + coverage against the source pools; throws on violation.
    void check(const DatasetPool& a, const DatasetPool& b) const;
};

// Union both pools (A first), shuffle, deal 5 blocks of per_client, then
// `server` ids to the server; the rest is leftover.
SplitAssignment homogeneous_split(const DatasetPool& a, const DatasetPool& b,
                                  std::size_t per_client, std::size_t server, SeededRng rng);

// Pool B split evenly across clients 4-5; `server` ids sampled from pool A;
// remaining pool-A ids split evenly across clients 1-3. Remainders go to the
// lowest-numbered node; leftover is empty.
SplitAssignment heterogeneous_split(const DatasetPool& a, const DatasetPool& b,
                                    std::size_t server, SeededRng rng);

// Plain-text manifest: "client1: id id ...", one node per line.
void write_manifest(const SplitAssignment& sa, std::ostream& os);
SplitAssignment read_manifest(std::istream& is);  // throws ConfigError on bad syntax

}  // namespace fedmae
