#include "fedmae/trainer.hpp"

#include <numeric>

#include "fedmae/errors.hpp"

namespace fedmae {

void TrainerConfig::validate() const {
    if (local_steps < 1) throw ConfigError("trainer: local_steps must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("trainer: learning_rate must be > 0");
    if (batch_size < 1) throw ConfigError("trainer: batch_size must be >= 1");
    if (!(mask_ratio > 0.0 && mask_ratio < 1.0))
        throw ConfigError("trainer: mask_ratio must lie in (0, 1)");
    shape.validate();
}

ClientUpdate local_train(const ParamVector& theta_t, std::span<const ImageSample> data,
                         const TrainerConfig& cfg, SeededRng rng, int node_id) {
    cfg.validate();
    if (data.empty()) throw std::invalid_argument("local_train: node has no data");

    MaeParams params = MaeParams::unflatten(cfg.shape, theta_t);
    const std::size_t n = data.size();
    const std::size_t batch = std::min<std::size_t>(cfg.batch_size, n);

    std::vector<PatchSet> cache(n);
    for (std::size_t i = 0; i < n; ++i) cache[i] = patchify(data[i], cfg.shape.patch);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    SeededRng shuffle_rng = rng.derive(0);
    shuffle_rng.shuffle(order);
    SeededRng mask_root = rng.derive(1);

    ClientUpdate out;
    out.node_id = node_id;
    out.sample_count = n;
    out.loss_trace.reserve(cfg.local_steps);
    out.grad_norm_trace.reserve(cfg.local_steps);

    std::vector<double> theta = theta_t.values;
    std::vector<MaskSet> masks(batch);
    std::vector<MaeBatchItem> items(batch);
    const int patches = cfg.shape.patches_per_image();

    for (int k = 0; k < cfg.local_steps; ++k) {
        SeededRng step_rng = mask_root.derive(static_cast<std::uint64_t>(k));
        for (std::size_t j = 0; j < batch; ++j) {
            const std::size_t idx = order[(static_cast<std::size_t>(k) * batch + j) % n];
            SeededRng mrng = step_rng.derive(idx);
            masks[j] = sample_mask(patches, cfg.mask_ratio, mrng);
            items[j] = {&cache[idx], &masks[j]};
        }
        MaeGrad gr = mae_grad(params, items);
        out.loss_trace.push_back(gr.loss);
        out.grad_norm_trace.push_back(l2_norm(gr.grad));
        for (std::size_t i = 0; i < theta.size(); ++i)
            theta[i] = theta[i] - cfg.learning_rate * gr.grad.values[i];
        params = MaeParams::unflatten(cfg.shape, ParamVector{theta});
    }

    out.delta.values.resize(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i)
        out.delta.values[i] = exact_delta(theta_t.values[i], theta[i]);
    require_finite(out.delta, "local_train delta");
    return out;
}

}  // namespace fedmae
