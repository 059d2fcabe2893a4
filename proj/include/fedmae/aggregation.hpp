#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "fedmae/param_vector.hpp"
#include "fedmae/trainer.hpp"

namespace fedmae {

enum class StrategyKind { FedAvg, FedAvgM, FedAdam, FedAdagrad };
enum class Weighting { Uniform, SampleWeighted };

std::string strategy_name(StrategyKind k);
StrategyKind parse_strategy(const std::string& name);  // throws ConfigError
std::string weighting_name(Weighting w);
Weighting parse_weighting(const std::string& name);    // throws ConfigError

// Recommended server learning rate when the config leaves it unset: 1 for the
// averaging kinds, 1e-2 for the adaptive ones.
double default_server_lr(StrategyKind k);

struct Strategy {
    StrategyKind kind = StrategyKind::FedAvg;
    double server_lr = 1.0;   // eta_s
    double momentum = 0.9;    // alpha (FedAvgM)
    double beta1 = 0.9;
    double beta2 = 0.99;
    double epsilon = 1e-8;
    Weighting weighting = Weighting::SampleWeighted;
    // Reproduce the printed algorithm verbatim (server SUBTRACTS the
    // delta-derived step). Off by default: the delta is an improvement
    // direction, so the server adds it; see README on the sign convention.
    bool literal_signs = false;

    void validate() const;  // throws ConfigError
    bool operator==(const Strategy&) const = default;
};

struct ServerOptState {
    std::uint64_t round = 0;     // t, number of completed server steps
    ParamVector momentum_buf;    // FedAvgM buffer
    ParamVector first_moment;    // m
    ParamVector second_moment;   // v, elementwise >= 0

    static ServerOptState zeros(std::size_t dim);
    bool operator==(const ServerOptState&) const = default;
};

// Mean of client deltas, sorted by node id first so arrival order is
// irrelevant. Uniform: plain mean; SampleWeighted: weights n_k.
ParamVector combine_deltas(std::span<const ClientUpdate> updates, Weighting weighting);

struct ServerStep {
    ParamVector theta;
    ServerOptState state;
};

// One server-optimizer step. Pure: inputs are unmodified and equal inputs
// give bitwise equal outputs.
ServerStep step(const Strategy& strategy, const ServerOptState& state,
                const ParamVector& theta_t, const ParamVector& delta_bar);

}  // namespace fedmae
