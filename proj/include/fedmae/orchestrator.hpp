#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "fedmae/aggregation.hpp"
#include "fedmae/image.hpp"
#include "fedmae/partition.hpp"
#include "fedmae/synth.hpp"
#include "fedmae/trainer.hpp"

namespace fedmae {

enum class SplitKind { Homogeneous, Heterogeneous, Custom };

std::string split_name(SplitKind k);
SplitKind parse_split(const std::string& name);  // throws ConfigError

// Seeded per-(round, node) message faults. A dropped or corrupted update is
// excluded from that round's combination and logged in the RoundRecord.
struct FaultSpec {
    double drop_prob = 0.0;
    double corrupt_prob = 0.0;

    bool operator==(const FaultSpec&) const = default;
};

struct FederationConfig {
    int num_clients = 5;   // N; the server is node id N, so N+1 nodes train
    int rounds = 150;      // R
    Strategy strategy;
    TrainerConfig trainer;             // shape lives in trainer.shape
    SplitKind split = SplitKind::Heterogeneous;
    std::size_t split_per_client = 0;  // homogeneous only
    std::size_t split_server = 300;
    std::string manifest_path;         // custom split only
    SynthSpec synth;                   // training-pool source
    int eval_per_class = 4;            // held-out eval images per (class, domain)
    int probe_per_class = 60;          // held-out probe images per (class, domain)
    double init_scale = 0.05;
    std::uint64_t master_seed = 1;
    FaultSpec fault;

    void validate() const;  // throws ConfigError
    bool operator==(const FederationConfig&) const = default;
};

struct RoundRecord {
    std::uint64_t round = 0;
    double global_loss = 0.0;          // post-step model on the fixed eval batch
    std::vector<double> node_losses;   // final local-loss-trace entry per node
    double delta_norm = 0.0;           // l2 norm of the combined delta
    std::uint64_t theta_checksum = 0;  // checksum of the post-step model
    std::vector<int> dropped;
    std::vector<int> corrupted;
};

// The synthetic corpus plus the id ranges reserved for training pools,
// the labeled probe set, and the fixed eval batch (all disjoint).
struct Dataset {
    std::vector<ImageSample> images;  // position == sample id
    DatasetPool pool_a, pool_b;       // training ids only
    std::vector<SampleId> probe_ids;
    std::vector<SampleId> eval_ids;
};

Dataset assemble_dataset(const FederationConfig& cfg);

// Materialize the configured split into per-node id lists; element N is the
// server shard. Built-in splits define 5 clients, so num_clients <= 5 and
// nodes 0..N-1 take clients 1..N.
std::vector<std::vector<SampleId>> build_shards(const FederationConfig& cfg, const Dataset& data);

ParamVector initial_theta(const FederationConfig& cfg);

struct ResumePoint {
    ParamVector theta;
    ServerOptState state;
    std::uint64_t start_round = 0;
};

struct RunHooks {
    // Called after each completed round with the post-step model and state.
    std::function<void(std::uint64_t round, const ParamVector&, const ServerOptState&)>
        on_round_end;
};

struct FederationResult {
    ParamVector theta;
    ServerOptState state;
    std::vector<RoundRecord> records;  // one per executed round
};

FederationResult run_federation(const FederationConfig& cfg);

// Core loop against a prepared dataset and explicit shards; `resume` starts
// from a checkpointed (theta, state, round) instead of round 0.
FederationResult run_federation(const FederationConfig& cfg, const Dataset& data,
                                const std::vector<std::vector<SampleId>>& shards,
                                const ResumePoint* resume = nullptr,
                                const RunHooks* hooks = nullptr);

// CSV schema: t,global_loss,delta_norm,theta_checksum,node_losses,dropped,corrupted
// (lists ';'-joined, floats %.17g, checksum 16 hex digits).
void write_rounds_csv(std::ostream& os, const std::vector<RoundRecord>& records);

}  // namespace fedmae
