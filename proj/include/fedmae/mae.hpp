#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fedmae/image.hpp"
#include "fedmae/param_vector.hpp"
#include "fedmae/rng.hpp"

namespace fedmae {

// Per-patch masked autoencoder:
//   encode:  z = W2 * tanh(W1 * x + b1) + b2            (p*p -> h -> d)
//   decode:  y = W4 * tanh(W3 * z + b3) + b4            (d -> h -> p*p)
// Masked patches are replaced by a learned mask token before encoding.
struct MaeShape {
    int patch = 4;
    int hidden = 32;
    int latent = 16;
    int height = 16;
    int width = 16;

    int patch_dim() const { return patch * patch; }
    int grid_h() const { return height / patch; }
    int grid_w() const { return width / patch; }
    int patches_per_image() const { return grid_h() * grid_w(); }
    std::size_t param_count() const;
    void validate() const;  // throws DimensionError / ConfigError

    bool operator==(const MaeShape&) const = default;
};

struct MaeParams {
    MaeShape shape;
    std::vector<double> enc_w1;      // h x p*p, row-major
    std::vector<double> enc_b1;      // h
    std::vector<double> enc_w2;      // d x h
    std::vector<double> enc_b2;      // d
    std::vector<double> dec_w1;      // h x d
    std::vector<double> dec_b1;      // h
    std::vector<double> dec_w2;      // p*p x h
    std::vector<double> dec_b2;      // p*p
    std::vector<double> mask_token;  // p*p

    static MaeParams zeros(const MaeShape& shape);
    // Weights and mask token uniform in [-scale, scale], biases zero.
    static MaeParams init(const MaeShape& shape, SeededRng& rng, double scale = 0.05);

    // Fixed chunk order: enc_w1, enc_b1, enc_w2, enc_b2,
    //                    dec_w1, dec_b1, dec_w2, dec_b2, mask_token.
    ParamVector flatten() const;
    static MaeParams unflatten(const MaeShape& shape, const ParamVector& theta);
};

// Reconstruction of every patch. Masked positions share one decode of the
// context latent (mask-token latent + mean visible-patch latent), which is
// how visible content reaches the masked reconstruction without cross-patch
// attention; unmasked patches pass through on their own latent. With every
// patch masked the context is the token latent alone.
PatchSet mae_forward(const MaeParams& params, const PatchSet& patches, const MaskSet& mask);

// Mean absolute error over masked-patch pixels only.
double masked_l1_loss(const PatchSet& recon, const PatchSet& target, const MaskSet& mask);

struct MaeBatchItem {
    const PatchSet* patches = nullptr;
    const MaskSet* mask = nullptr;
};

struct MaeGrad {
    ParamVector grad;   // d(loss)/d(theta), same layout as flatten()
    double loss = 0.0;  // mean over the batch of per-sample masked_l1_loss
};

// Analytic gradient of the batch-mean masked L1 loss. The L1 subgradient at
// zero is taken as zero. Per-sample contributions are combined by a pairwise
// midpoint-split reduction, so concatenating a batch with itself reproduces
// the same gradient bit for bit.
MaeGrad mae_grad(const MaeParams& params, std::span<const MaeBatchItem> batch);

// Batch-mean loss without gradients (same pairwise reduction as mae_grad).
double mae_batch_loss(const MaeParams& params, std::span<const MaeBatchItem> batch);

// Feature vector: mean encoder latent over all patches, nothing masked.
std::vector<double> mae_encode(const MaeParams& params, const PatchSet& patches);

}  // namespace fedmae
