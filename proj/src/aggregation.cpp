#include "fedmae/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fedmae/errors.hpp"

namespace fedmae {
namespace {

// out[i] = theta[i] + scale * v[i]. FedAvg and FedAvgM both step through
// this helper so FedAvgM with zero momentum matches FedAvg bit for bit.
ParamVector apply_step(const ParamVector& theta, const ParamVector& v, double scale) {
    ParamVector out;
    out.values.resize(theta.values.size());
    for (std::size_t i = 0; i < out.values.size(); ++i)
        out.values[i] = theta.values[i] + scale * v.values[i];
    return out;
}

}  // namespace

std::string strategy_name(StrategyKind k) {
    switch (k) {
        case StrategyKind::FedAvg: return "fedavg";
        case StrategyKind::FedAvgM: return "fedavgm";
        case StrategyKind::FedAdam: return "fedadam";
        case StrategyKind::FedAdagrad: return "fedadagrad";
    }
    throw ConfigError("strategy_name: bad enum value");
}

StrategyKind parse_strategy(const std::string& name) {
    if (name == "fedavg") return StrategyKind::FedAvg;
    if (name == "fedavgm") return StrategyKind::FedAvgM;
    if (name == "fedadam") return StrategyKind::FedAdam;
    if (name == "fedadagrad") return StrategyKind::FedAdagrad;
    throw ConfigError("unknown strategy: " + name);
}

std::string weighting_name(Weighting w) {
    return w == Weighting::Uniform ? "uniform" : "sample";
}

Weighting parse_weighting(const std::string& name) {
    if (name == "uniform") return Weighting::Uniform;
    if (name == "sample") return Weighting::SampleWeighted;
    throw ConfigError("unknown weighting: " + name);
}

double default_server_lr(StrategyKind k) {
    return (k == StrategyKind::FedAdam || k == StrategyKind::FedAdagrad) ? 1e-2 : 1.0;
}

void Strategy::validate() const {
    if (!(server_lr > 0.0)) throw ConfigError("strategy: server_lr must be > 0");
    if (!(momentum >= 0.0 && momentum < 1.0))
        throw ConfigError("strategy: momentum must lie in [0, 1)");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("strategy: beta1 must lie in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("strategy: beta2 must lie in [0, 1)");
    if (!(epsilon > 0.0)) throw ConfigError("strategy: epsilon must be > 0");
}

ServerOptState ServerOptState::zeros(std::size_t dim) {
    ServerOptState s;
    s.momentum_buf.values.assign(dim, 0.0);
    s.first_moment.values.assign(dim, 0.0);
    s.second_moment.values.assign(dim, 0.0);
    return s;
}

ParamVector combine_deltas(std::span<const ClientUpdate> updates, Weighting weighting) {
    if (updates.empty())
        throw std::invalid_argument("combine_deltas: no updates");
    std::vector<const ClientUpdate*> sorted;
    sorted.reserve(updates.size());
    for (const auto& u : updates) sorted.push_back(&u);
    std::sort(sorted.begin(), sorted.end(),
              [](const ClientUpdate* a, const ClientUpdate* b) { return a->node_id < b->node_id; });

    std::vector<ParamVector> vs;
    std::vector<double> ws;
    vs.reserve(sorted.size());
    ws.reserve(sorted.size());
    for (const ClientUpdate* u : sorted) {
        vs.push_back(u->delta);
        ws.push_back(weighting == Weighting::Uniform ? 1.0
                                                     : static_cast<double>(u->sample_count));
    }
    return weighted_mean(vs, ws);
}

ServerStep step(const Strategy& strategy, const ServerOptState& state,
                const ParamVector& theta_t, const ParamVector& delta_bar) {
    strategy.validate();
    const std::size_t dim = theta_t.values.size();
    if (dim == 0) throw DimensionError("step: empty model");
    require_same_length(theta_t, delta_bar, "step");
    if (state.momentum_buf.values.size() != dim || state.first_moment.values.size() != dim ||
        state.second_moment.values.size() != dim)
        throw DimensionError("step: optimizer state length does not match model");
    for (double x : delta_bar.values)
        if (!std::isfinite(x))
            throw NumericError("step: non-finite aggregate delta at round " +
                               std::to_string(state.round));

    const double dir = strategy.literal_signs ? -1.0 : 1.0;
    const double scale = dir * strategy.server_lr;

    ServerStep out;
    out.state = state;
    out.state.round = state.round + 1;

    switch (strategy.kind) {
        case StrategyKind::FedAvg: {
            out.theta = apply_step(theta_t, delta_bar, scale);
            break;
        }
        case StrategyKind::FedAvgM: {
            auto& vm = out.state.momentum_buf.values;
            for (std::size_t i = 0; i < dim; ++i)
                vm[i] = strategy.momentum * vm[i] + delta_bar.values[i];
            out.theta = apply_step(theta_t, out.state.momentum_buf, scale);
            break;
        }
        case StrategyKind::FedAdam: {
            const double b1 = strategy.beta1, b2 = strategy.beta2;
            // Bias correction on m only, as printed; t is the 0-based round.
            const double corr = 1.0 - std::pow(b1, static_cast<double>(state.round) + 1.0);
            auto& m = out.state.first_moment.values;
            auto& v = out.state.second_moment.values;
            out.theta.values.resize(dim);
            for (std::size_t i = 0; i < dim; ++i) {
                const double d = delta_bar.values[i];
                m[i] = b1 * m[i] + (1.0 - b1) * d;
                v[i] = b2 * v[i] + (1.0 - b2) * (d * d);
                const double mhat = m[i] / corr;
                out.theta.values[i] =
                    theta_t.values[i] + scale * (mhat / (std::sqrt(v[i]) + strategy.epsilon));
            }
            break;
        }
        case StrategyKind::FedAdagrad: {
            const double b1 = strategy.beta1;
            auto& m = out.state.first_moment.values;
            auto& v = out.state.second_moment.values;
            out.theta.values.resize(dim);
            for (std::size_t i = 0; i < dim; ++i) {
                const double d = delta_bar.values[i];
                m[i] = b1 * m[i] + (1.0 - b1) * d;
                v[i] = v[i] + d * d;
                // epsilon inside the root here, outside for FedAdam: the two
                // branches are printed differently and kept that way.
                out.theta.values[i] =
                    theta_t.values[i] + scale * (m[i] / std::sqrt(v[i] + strategy.epsilon));
            }
            break;
        }
    }
    require_finite(out.theta, "step result");
    return out;
}

}  // namespace fedmae
