#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "fedmae/benchmark.hpp"
#include "fedmae/orchestrator.hpp"

namespace fedmae {

inline constexpr int kConfigSchemaVersion = 1;

// Everything a run needs, mapped 1:1 onto the flat key=value config file.
// The master seed feeds both the federation and the synthetic generator.
struct RunConfig {
    int schema_version = kConfigSchemaVersion;
    std::string bound = "fed";  // pretrain target: fed | lower | upper
    FederationConfig fed;        // carries strategy, trainer, synth, fault, seed
    ProbeOptions probe;
    std::uint64_t sweep_every = 10;

    bool operator==(const RunConfig&) const = default;
};

RunConfig default_run_config();

// Parse `key = value` lines ('#' comments, blank lines allowed). Unknown or
// duplicate keys are rejected. Any key may be omitted; its documented default
// applies. strategy.server_lr defaults by kind: 1 for fedavg/fedavgm, 1e-2
// for fedadam/fedadagrad.
RunConfig load_config(std::istream& is);
RunConfig load_config_file(const std::string& path);  // NotFoundError if absent
void save_config(const RunConfig& c, std::ostream& os);
void save_config_file(const RunConfig& c, const std::string& path);

struct Checkpoint {
    MaeShape shape;
    std::uint64_t round = 0;  // completed rounds; equals state.round
    std::uint64_t master_seed = 0;
    ParamVector theta;
    ServerOptState state;

    bool operator==(const Checkpoint&) const = default;
};

// Binary layout (little-endian):
//   "FMCKPT01" | u32 version | i32 p,h,d,H,W | u64 round | u64 master_seed |
//   u64 len | len x f64 theta | 3 x (len x f64) opt-state buffers |
//   u64 fnv1a64 over all preceding bytes
std::vector<std::uint8_t> checkpoint_bytes(const Checkpoint& c);
Checkpoint checkpoint_from_bytes(const std::vector<std::uint8_t>& bytes);

// Atomic: writes a temp file then renames.
void save_checkpoint(const Checkpoint& c, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);  // NotFoundError if absent

}  // namespace fedmae
