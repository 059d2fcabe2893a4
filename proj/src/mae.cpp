#include "fedmae/mae.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "fedmae/errors.hpp"

namespace fedmae {
namespace {

double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// y = W x + b, W row-major (rows x cols).
void affine(const double* w, const double* b, const double* x, double* y, int rows, int cols) {
    for (int i = 0; i < rows; ++i) {
        double acc = b[i];
        const double* row = w + static_cast<std::size_t>(i) * cols;
        for (int j = 0; j < cols; ++j) acc += row[j] * x[j];
        y[i] = acc;
    }
}

// Chunk offsets into the flattened parameter vector.
struct Layout {
    int p2, h, d;
    std::size_t ew1, eb1, ew2, eb2, dw1, db1, dw2, db2, mt, total;

    explicit Layout(const MaeShape& s) {
        p2 = s.patch_dim();
        h = s.hidden;
        d = s.latent;
        ew1 = 0;
        eb1 = ew1 + static_cast<std::size_t>(h) * p2;
        ew2 = eb1 + h;
        eb2 = ew2 + static_cast<std::size_t>(d) * h;
        dw1 = eb2 + d;
        db1 = dw1 + static_cast<std::size_t>(h) * d;
        dw2 = db1 + h;
        db2 = dw2 + static_cast<std::size_t>(p2) * h;
        mt = db2 + p2;
        total = mt + p2;
    }
};

struct EncActs {
    std::vector<double> a1, z2;
};

struct DecActs {
    std::vector<double> a3, out;
};

void run_enc(const MaeParams& p, const double* x, EncActs& act) {
    const int p2 = p.shape.patch_dim();
    const int h = p.shape.hidden;
    act.a1.resize(h);
    act.z2.resize(p.shape.latent);
    affine(p.enc_w1.data(), p.enc_b1.data(), x, act.a1.data(), h, p2);
    for (int i = 0; i < h; ++i) act.a1[i] = std::tanh(act.a1[i]);
    affine(p.enc_w2.data(), p.enc_b2.data(), act.a1.data(), act.z2.data(), p.shape.latent, h);
}

void run_dec(const MaeParams& p, const double* z, DecActs& act) {
    const int h = p.shape.hidden;
    act.a3.resize(h);
    act.out.resize(p.shape.patch_dim());
    affine(p.dec_w1.data(), p.dec_b1.data(), z, act.a3.data(), h, p.shape.latent);
    for (int i = 0; i < h; ++i) act.a3[i] = std::tanh(act.a3[i]);
    affine(p.dec_w2.data(), p.dec_b2.data(), act.a3.data(), act.out.data(),
           p.shape.patch_dim(), h);
}

// Latent the decoder sees at masked positions: the mask-token latent plus the
// mean latent of the visible patches. The pooled term is what couples masked
// reconstruction to image content (the stand-in for cross-patch attention);
// with everything masked it degenerates to the token latent alone. Visible
// encoder activations are returned for the backward pass.
std::vector<double> context_latent(const MaeParams& p, const PatchSet& ps, const MaskSet& mask,
                                   const EncActs& token, std::vector<EncActs>* visible) {
    std::vector<double> zc = token.z2;
    const int vis = ps.count() - mask.count();
    if (vis == 0) return zc;
    const int d = p.shape.latent;
    std::vector<double> acc(d, 0.0);
    EncActs e;
    for (int i = 0; i < ps.count(); ++i) {
        if (mask.is_masked(i)) continue;
        run_enc(p, ps.patch(i).data(), e);
        for (int k = 0; k < d; ++k) acc[k] += e.z2[k];
        if (visible) visible->push_back(e);
    }
    for (int k = 0; k < d; ++k) zc[k] += acc[k] / vis;
    return zc;
}

void check_batch_item(const MaeShape& shape, const PatchSet& ps, const MaskSet& mask) {
    if (ps.patch_dim != shape.patch_dim())
        throw DimensionError("mae: patch_dim does not match model shape");
    if (ps.count() < 1) throw DimensionError("mae: empty patch set");
    int prev = -1;
    for (int idx : mask.masked) {
        if (idx <= prev || idx >= ps.count())
            throw DimensionError("mae: mask indices must be sorted, unique, in range");
        prev = idx;
    }
}

// Loss for one sample; if acc_sign is non-null it also accumulates the L1
// sign sum per output pixel (shared across masked patches, which all see the
// same context reconstruction).
double sample_loss(const double* out, const PatchSet& target, const MaskSet& mask,
                   double* acc_sign) {
    const int p2 = target.patch_dim;
    const double denom = static_cast<double>(mask.count()) * p2;
    double acc = 0.0;
    for (int m : mask.masked) {
        auto t = target.patch(m);
        for (int j = 0; j < p2; ++j) {
            const double diff = out[j] - t[j];
            acc += std::abs(diff);
            if (acc_sign) acc_sign[j] += sgn(diff);
        }
    }
    return acc / denom;
}

// Decoder backward from the masked reconstruction. d_out is already scaled by
// 1 / (M * p2); zc is the context latent the decoder ran on. Fills d_zc.
void dec_backward(const MaeParams& p, const Layout& L, const DecActs& act, const double* zc,
                  const std::vector<double>& d_out, double* g, std::vector<double>& d_zc) {
    const int p2 = L.p2, h = L.h, d = L.d;
    std::vector<double> d_a3(h, 0.0), d_z3(h);
    d_zc.assign(d, 0.0);

    for (int j = 0; j < p2; ++j) {
        g[L.db2 + j] += d_out[j];
        double* grow = g + L.dw2 + static_cast<std::size_t>(j) * h;
        const double* wrow = p.dec_w2.data() + static_cast<std::size_t>(j) * h;
        for (int i = 0; i < h; ++i) {
            grow[i] += d_out[j] * act.a3[i];
            d_a3[i] += wrow[i] * d_out[j];
        }
    }
    for (int i = 0; i < h; ++i) d_z3[i] = d_a3[i] * (1.0 - act.a3[i] * act.a3[i]);
    for (int i = 0; i < h; ++i) {
        g[L.db1 + i] += d_z3[i];
        double* grow = g + L.dw1 + static_cast<std::size_t>(i) * d;
        const double* wrow = p.dec_w1.data() + static_cast<std::size_t>(i) * d;
        for (int k = 0; k < d; ++k) {
            grow[k] += d_z3[i] * zc[k];
            d_zc[k] += wrow[k] * d_z3[i];
        }
    }
}

// Encoder backward for one input (a visible patch or the mask token) with
// upstream gradient d_z2 at the latent. Token input additionally routes
// gradient into the mask-token parameters.
void enc_backward(const MaeParams& p, const Layout& L, const EncActs& act, const double* x,
                  const std::vector<double>& d_z2, bool token_input, double* g) {
    const int p2 = L.p2, h = L.h, d = L.d;
    std::vector<double> d_a1(h, 0.0), d_z1(h);

    for (int k = 0; k < d; ++k) {
        g[L.eb2 + k] += d_z2[k];
        double* grow = g + L.ew2 + static_cast<std::size_t>(k) * h;
        const double* wrow = p.enc_w2.data() + static_cast<std::size_t>(k) * h;
        for (int i = 0; i < h; ++i) {
            grow[i] += d_z2[k] * act.a1[i];
            d_a1[i] += wrow[i] * d_z2[k];
        }
    }
    for (int i = 0; i < h; ++i) d_z1[i] = d_a1[i] * (1.0 - act.a1[i] * act.a1[i]);
    for (int i = 0; i < h; ++i) {
        g[L.eb1 + i] += d_z1[i];
        double* grow = g + L.ew1 + static_cast<std::size_t>(i) * p2;
        const double* wrow = p.enc_w1.data() + static_cast<std::size_t>(i) * p2;
        for (int j = 0; j < p2; ++j) {
            grow[j] += d_z1[i] * x[j];
            if (token_input) g[L.mt + j] += wrow[j] * d_z1[i];
        }
    }
}

struct Reduced {
    std::vector<double> grad;  // empty when only loss is reduced
    double loss = 0.0;
};

// Pairwise midpoint-split reduction over [lo, hi). The tree shape depends
// only on the span length, so concatenating a batch with itself doubles every
// partial sum exactly and the final mean is bit-identical.
Reduced reduce(const MaeParams& p, const Layout& L, std::span<const MaeBatchItem> batch,
               std::size_t lo, std::size_t hi, bool want_grad) {
    if (hi - lo == 1) {
        const auto& item = batch[lo];
        check_batch_item(p.shape, *item.patches, *item.mask);
        if (item.mask->count() == 0)
            throw DimensionError("mae: sample has no masked patches");
        EncActs token;
        run_enc(p, p.mask_token.data(), token);
        std::vector<EncActs> visible;
        const std::vector<double> zc =
            context_latent(p, *item.patches, *item.mask, token, want_grad ? &visible : nullptr);
        DecActs dec;
        run_dec(p, zc.data(), dec);
        Reduced r;
        if (want_grad) {
            std::vector<double> sign_acc(static_cast<std::size_t>(L.p2), 0.0);
            r.loss = sample_loss(dec.out.data(), *item.patches, *item.mask, sign_acc.data());
            const double denom = static_cast<double>(item.mask->count()) * L.p2;
            std::vector<double> d_out(static_cast<std::size_t>(L.p2));
            for (int j = 0; j < L.p2; ++j) d_out[j] = sign_acc[j] / denom;
            r.grad.assign(L.total, 0.0);
            std::vector<double> d_zc;
            dec_backward(p, L, dec, zc.data(), d_out, r.grad.data(), d_zc);
            enc_backward(p, L, token, p.mask_token.data(), d_zc, /*token_input=*/true,
                         r.grad.data());
            if (!visible.empty()) {
                // the pooled term weights each visible latent by 1/V
                std::vector<double> d_vis(d_zc);
                for (double& v : d_vis) v /= static_cast<double>(visible.size());
                std::size_t vi = 0;
                for (int i = 0; i < item.patches->count(); ++i) {
                    if (item.mask->is_masked(i)) continue;
                    enc_backward(p, L, visible[vi], item.patches->patch(i).data(), d_vis,
                                 /*token_input=*/false, r.grad.data());
                    ++vi;
                }
            }
        } else {
            r.loss = sample_loss(dec.out.data(), *item.patches, *item.mask, nullptr);
        }
        return r;
    }
    const std::size_t mid = lo + (hi - lo) / 2;
    Reduced left = reduce(p, L, batch, lo, mid, want_grad);
    Reduced right = reduce(p, L, batch, mid, hi, want_grad);
    left.loss += right.loss;
    if (want_grad)
        for (std::size_t i = 0; i < left.grad.size(); ++i) left.grad[i] += right.grad[i];
    return left;
}

}  // namespace

std::size_t MaeShape::param_count() const { return Layout(*this).total; }

void MaeShape::validate() const {
    if (patch <= 0 || hidden <= 0 || latent <= 0 || height <= 0 || width <= 0)
        throw ConfigError("mae shape: all dimensions must be positive");
    if (height % patch != 0 || width % patch != 0)
        throw ConfigError("mae shape: image dimensions must be divisible by patch size");
    if (patches_per_image() < 2)
        throw ConfigError("mae shape: need at least 2 patches per image");
}

MaeParams MaeParams::zeros(const MaeShape& shape) {
    shape.validate();
    const Layout L(shape);
    MaeParams p;
    p.shape = shape;
    p.enc_w1.assign(static_cast<std::size_t>(L.h) * L.p2, 0.0);
    p.enc_b1.assign(L.h, 0.0);
    p.enc_w2.assign(static_cast<std::size_t>(L.d) * L.h, 0.0);
    p.enc_b2.assign(L.d, 0.0);
    p.dec_w1.assign(static_cast<std::size_t>(L.h) * L.d, 0.0);
    p.dec_b1.assign(L.h, 0.0);
    p.dec_w2.assign(static_cast<std::size_t>(L.p2) * L.h, 0.0);
    p.dec_b2.assign(L.p2, 0.0);
    p.mask_token.assign(L.p2, 0.0);
    return p;
}

MaeParams MaeParams::init(const MaeShape& shape, SeededRng& rng, double scale) {
    MaeParams p = zeros(shape);
    // Draw order is part of the format: weight matrices in flatten order,
    // then the mask token; biases stay zero.
    auto fill = [&](std::vector<double>& v) {
        for (double& x : v) x = rng.uniform(-scale, scale);
    };
    fill(p.enc_w1);
    fill(p.enc_w2);
    fill(p.dec_w1);
    fill(p.dec_w2);
    fill(p.mask_token);
    return p;
}

ParamVector MaeParams::flatten() const {
    ParamVector out;
    out.values.reserve(shape.param_count());
    for (const auto* chunk : {&enc_w1, &enc_b1, &enc_w2, &enc_b2, &dec_w1, &dec_b1,
                              &dec_w2, &dec_b2, &mask_token})
        out.values.insert(out.values.end(), chunk->begin(), chunk->end());
    return out;
}

MaeParams MaeParams::unflatten(const MaeShape& shape, const ParamVector& theta) {
    shape.validate();
    if (theta.values.size() != shape.param_count())
        throw DimensionError("unflatten: parameter vector length does not match shape");
    MaeParams p = zeros(shape);
    const double* src = theta.values.data();
    for (auto* chunk : {&p.enc_w1, &p.enc_b1, &p.enc_w2, &p.enc_b2, &p.dec_w1, &p.dec_b1,
                        &p.dec_w2, &p.dec_b2, &p.mask_token}) {
        std::copy(src, src + chunk->size(), chunk->begin());
        src += chunk->size();
    }
    return p;
}

PatchSet mae_forward(const MaeParams& params, const PatchSet& patches, const MaskSet& mask) {
    check_batch_item(params.shape, patches, mask);
    PatchSet recon;
    recon.patch_dim = patches.patch_dim;
    recon.data.resize(patches.data.size());
    EncActs token;
    run_enc(params, params.mask_token.data(), token);
    const std::vector<double> zc = context_latent(params, patches, mask, token, nullptr);
    DecActs dec;
    run_dec(params, zc.data(), dec);
    EncActs e;
    DecActs d;
    for (int i = 0; i < patches.count(); ++i) {
        if (mask.is_masked(i)) {
            std::copy(dec.out.begin(), dec.out.end(), recon.patch(i).begin());
        } else {
            // unmasked patches pass through on their own latent
            run_enc(params, patches.patch(i).data(), e);
            run_dec(params, e.z2.data(), d);
            std::copy(d.out.begin(), d.out.end(), recon.patch(i).begin());
        }
    }
    return recon;
}

double masked_l1_loss(const PatchSet& recon, const PatchSet& target, const MaskSet& mask) {
    if (recon.patch_dim != target.patch_dim || recon.count() != target.count())
        throw DimensionError("masked_l1_loss: reconstruction and target differ in shape");
    if (mask.count() == 0)
        throw DimensionError("masked_l1_loss: empty mask");
    int prev = -1;
    for (int idx : mask.masked) {
        if (idx <= prev || idx >= target.count())
            throw DimensionError("masked_l1_loss: mask indices must be sorted, unique, in range");
        prev = idx;
    }
    const double denom = static_cast<double>(mask.count()) * target.patch_dim;
    double acc = 0.0;
    for (int m : mask.masked) {
        auto r = recon.patch(m);
        auto t = target.patch(m);
        for (int j = 0; j < target.patch_dim; ++j) acc += std::abs(r[j] - t[j]);
    }
    return acc / denom;
}

MaeGrad mae_grad(const MaeParams& params, std::span<const MaeBatchItem> batch) {
    if (batch.empty()) throw DimensionError("mae_grad: empty batch");
    const Layout L(params.shape);
    Reduced r = reduce(params, L, batch, 0, batch.size(), /*want_grad=*/true);
    const double b = static_cast<double>(batch.size());
    MaeGrad out;
    out.loss = r.loss / b;
    out.grad.values.resize(L.total);
    for (std::size_t i = 0; i < L.total; ++i) out.grad.values[i] = r.grad[i] / b;
    return out;
}

double mae_batch_loss(const MaeParams& params, std::span<const MaeBatchItem> batch) {
    if (batch.empty()) throw DimensionError("mae_batch_loss: empty batch");
    const Layout L(params.shape);
    Reduced r = reduce(params, L, batch, 0, batch.size(), /*want_grad=*/false);
    return r.loss / static_cast<double>(batch.size());
}

std::vector<double> mae_encode(const MaeParams& params, const PatchSet& patches) {
    if (patches.patch_dim != params.shape.patch_dim())
        throw DimensionError("mae_encode: patch_dim does not match model shape");
    if (patches.count() < 1) throw DimensionError("mae_encode: empty patch set");
    const int d = params.shape.latent;
    EncActs act;
    std::vector<double> sum(d, 0.0);
    for (int i = 0; i < patches.count(); ++i) {
        run_enc(params, patches.patch(i).data(), act);
        for (int k = 0; k < d; ++k) sum[k] += act.z2[k];
    }
    const double n = static_cast<double>(patches.count());
    for (int k = 0; k < d; ++k) sum[k] /= n;
    return sum;
}

}  // namespace fedmae
