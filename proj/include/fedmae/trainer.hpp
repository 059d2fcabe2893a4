#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fedmae/image.hpp"
#include "fedmae/mae.hpp"
#include "fedmae/param_vector.hpp"
#include "fedmae/rng.hpp"

namespace fedmae {

struct TrainerConfig {
    int local_steps = 5;          // K
    double learning_rate = 0.05;  // eta
    int batch_size = 32;          // B
    std::uint64_t seed = 0;       // used only when a caller builds the RNG from it;
                                  // the orchestrator passes a derived stream instead
    MaeShape shape;
    double mask_ratio = 0.6;

    void validate() const;  // throws ConfigError
    bool operator==(const TrainerConfig&) const = default;
};

struct ClientUpdate {
    int node_id = 0;
    std::uint64_t sample_count = 0;        // n_k
    ParamVector delta;                     // theta_K - theta_t
    std::vector<double> loss_trace;        // pre-update batch loss, one per step
    std::vector<double> grad_norm_trace;   // l2 norm of the batch gradient, one per step
};

// K steps of plain SGD from theta_t on this node's data. RNG discipline
// (part of the reproducibility contract):
//   - batch order: rng.derive(0) shuffles the sample indices once, then
//     step k takes positions [k*B', (k+1)*B') of the shuffled order mod n,
//     B' = min(B, n);
//   - masks: the sample at dataset-local index i in step k uses the stream
//     rng.derive(1).derive(k).derive(i), fresh every step.
// The returned delta re-applies exactly: theta_t (+) delta == final local
// parameters bit for bit (see exact_delta).
ClientUpdate local_train(const ParamVector& theta_t, std::span<const ImageSample> data,
                         const TrainerConfig& cfg, SeededRng rng, int node_id = 0);

}  // namespace fedmae
