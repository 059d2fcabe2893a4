#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <set>
#include <vector>

#include "doctest.h"
#include "fedmae/errors.hpp"
#include "fedmae/image.hpp"
#include "fedmae/mae.hpp"
#include "fedmae/rng.hpp"

using namespace fedmae;

namespace {

ImageSample make_image(int h, int w, SeededRng& rng) {
    ImageSample img;
    img.height = h;
    img.width = w;
    img.pixels.resize(static_cast<std::size_t>(h) * w);
    for (auto& p : img.pixels) p = rng.next_double();
    return img;
}

MaeParams random_params(const MaeShape& shape, std::uint64_t seed) {
    SeededRng rng(seed, 9000);
    return MaeParams::init(shape, rng, 0.05);
}

// Step-by-step re-implementation of the per-patch MLP with explicit loops,
// kept deliberately dumb so it can serve as an oracle for the library path.
std::vector<double> oracle_latent(const MaeParams& p, const std::vector<double>& x) {
    const int p2 = p.shape.patch_dim(), h = p.shape.hidden, d = p.shape.latent;
    std::vector<double> a1(h), z2(d);
    for (int i = 0; i < h; ++i) {
        double s = p.enc_b1[i];
        for (int j = 0; j < p2; ++j) s += p.enc_w1[static_cast<std::size_t>(i) * p2 + j] * x[j];
        a1[i] = std::tanh(s);
    }
    for (int k = 0; k < d; ++k) {
        double s = p.enc_b2[k];
        for (int i = 0; i < h; ++i) s += p.enc_w2[static_cast<std::size_t>(k) * h + i] * a1[i];
        z2[k] = s;
    }
    return z2;
}

std::vector<double> oracle_decode(const MaeParams& p, const std::vector<double>& z) {
    const int p2 = p.shape.patch_dim(), h = p.shape.hidden, d = p.shape.latent;
    std::vector<double> a3(h), out(p2);
    for (int i = 0; i < h; ++i) {
        double s = p.dec_b1[i];
        for (int k = 0; k < d; ++k) s += p.dec_w1[static_cast<std::size_t>(i) * d + k] * z[k];
        a3[i] = std::tanh(s);
    }
    for (int j = 0; j < p2; ++j) {
        double s = p.dec_b2[j];
        for (int i = 0; i < h; ++i) s += p.dec_w2[static_cast<std::size_t>(j) * h + i] * a3[i];
        out[j] = s;
    }
    return out;
}

std::vector<double> oracle_mlp(const MaeParams& p, const std::vector<double>& x) {
    return oracle_decode(p, oracle_latent(p, x));
}

// What the decoder sees at masked positions: token latent + mean visible latent.
std::vector<double> oracle_context(const MaeParams& p, const PatchSet& ps, const MaskSet& m) {
    std::vector<double> zc = oracle_latent(p, p.mask_token);
    int vis = 0;
    std::vector<double> acc(zc.size(), 0.0);
    for (int i = 0; i < ps.count(); ++i) {
        if (m.is_masked(i)) continue;
        std::vector<double> z =
            oracle_latent(p, std::vector<double>(ps.patch(i).begin(), ps.patch(i).end()));
        for (std::size_t k = 0; k < z.size(); ++k) acc[k] += z[k];
        ++vis;
    }
    if (vis > 0)
        for (std::size_t k = 0; k < zc.size(); ++k) zc[k] += acc[k] / vis;
    return zc;
}

MaskSet mask_of(std::initializer_list<int> idx) {
    MaskSet m;
    m.masked.assign(idx);
    return m;
}

}  // namespace

TEST_CASE("patchify trivial cases") {
    SeededRng rng(1, 1);
    ImageSample img = make_image(4, 4, rng);

    PatchSet one = patchify(img, 4);
    CHECK(one.count() == 1);
    CHECK(std::equal(img.pixels.begin(), img.pixels.end(), one.data.begin()));

    PatchSet four = patchify(img, 2);
    CHECK(four.count() == 4);
    auto p0 = four.patch(0);
    CHECK(p0[0] == img.at(0, 0));
    CHECK(p0[1] == img.at(0, 1));
    CHECK(p0[2] == img.at(1, 0));
    CHECK(p0[3] == img.at(1, 1));
}

TEST_CASE("patchify of a 256x256 image with patch 16 yields 256 patches") {
    SeededRng rng(2, 1);
    ImageSample img = make_image(256, 256, rng);
    CHECK(patchify(img, 16).count() == 256);
}

TEST_CASE("patchify rejects indivisible dimensions, unpatchify inverts") {
    SeededRng rng(3, 1);
    ImageSample img = make_image(6, 8, rng);
    CHECK_THROWS_AS(patchify(img, 4), std::invalid_argument);

    PatchSet ps = patchify(img, 2);
    ImageSample back = unpatchify(ps, 2, 6, 8);
    CHECK(back.pixels == img.pixels);
}

TEST_CASE("sample_mask counts follow the keep-count rule") {
    SeededRng rng(4, 1);
    CHECK(sample_mask(256, 0.6, rng).count() == 154);  // 256 - round(0.4*256)
    CHECK(sample_mask(10, 0.6, rng).count() == 6);

    for (int pcount : {2, 3, 5, 16, 17, 100, 255, 256, 511, 512}) {
        for (double ratio : {0.25, 0.5, 0.6, 0.75}) {
            const int kept = static_cast<int>(std::lround((1.0 - ratio) * pcount));
            const int expect = pcount - kept;
            if (expect < 1 || expect >= pcount) {
                SeededRng r2(4, 2);
                CHECK_THROWS_AS(sample_mask(pcount, ratio, r2), ConfigError);
                continue;
            }
            SeededRng r2(4, 2);
            MaskSet m = sample_mask(pcount, ratio, r2);
            CHECK(m.count() == expect);
            CHECK(std::is_sorted(m.masked.begin(), m.masked.end()));
            const std::set<int> uniq(m.masked.begin(), m.masked.end());
            CHECK(static_cast<int>(uniq.size()) == m.count());
            CHECK(m.masked.front() >= 0);
            CHECK(m.masked.back() < pcount);
        }
    }
}

TEST_CASE("sample_mask determinism and input validation") {
    SeededRng a(5, 1), b(5, 1);
    CHECK(sample_mask(10, 0.5, a).masked == sample_mask(10, 0.5, b).masked);
    SeededRng c(5, 1);
    CHECK_THROWS_AS(sample_mask(10, 0.0, c), ConfigError);
    CHECK_THROWS_AS(sample_mask(10, 1.0, c), ConfigError);
    CHECK_THROWS_AS(sample_mask(1, 0.5, c), DimensionError);
}

TEST_CASE("sample_mask is roughly uniform over indices") {
    SeededRng rng(6, 1);
    std::vector<int> hits(10, 0);
    const int trials = 4000;
    for (int t = 0; t < trials; ++t) {
        MaskSet m = sample_mask(10, 0.5, rng);
        for (int idx : m.masked) ++hits[idx];
    }
    for (int h : hits) {
        CHECK(h > trials / 2 - 200);  // expect trials*0.5 each
        CHECK(h < trials / 2 + 200);
    }
}

TEST_CASE("mae shape bookkeeping") {
    MaeShape s;  // p=4 h=32 d=16 16x16
    CHECK(s.patch_dim() == 16);
    CHECK(s.patches_per_image() == 16);
    // 32*16+32 + 16*32+16 + 32*16+32 + 16*32+16 + 16
    CHECK(s.param_count() == 2160);
    MaeShape bad = s;
    bad.height = 15;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    MaeShape tiny = s;
    tiny.height = 4;
    tiny.width = 4;
    CHECK_THROWS_AS(tiny.validate(), ConfigError);  // single patch
}

TEST_CASE("flatten/unflatten round-trips exactly") {
    MaeShape s;
    SeededRng rng(7, 1);
    ParamVector v(s.param_count());
    for (auto& x : v.values) x = rng.uniform(-2.0, 2.0);
    CHECK(MaeParams::unflatten(s, v).flatten() == v);
    ParamVector wrong(s.param_count() - 1);
    CHECK_THROWS_AS(MaeParams::unflatten(s, wrong), DimensionError);
}

TEST_CASE("init draws weights in range and leaves biases zero") {
    MaeShape s;
    SeededRng rng(8, 1);
    MaeParams p = MaeParams::init(s, rng, 0.05);
    for (double x : p.enc_w1) {
        CHECK(x >= -0.05);
        CHECK(x < 0.05);
    }
    for (double x : p.enc_b1) CHECK(x == 0.0);
    for (double x : p.dec_b2) CHECK(x == 0.0);
}

TEST_CASE("forward with all-zero params reconstructs zeros") {
    MaeShape s;
    MaeParams p = MaeParams::zeros(s);
    SeededRng rng(9, 1);
    ImageSample img = make_image(16, 16, rng);
    PatchSet ps = patchify(img, 4);
    MaskSet m = mask_of({0, 3, 7});
    PatchSet recon = mae_forward(p, ps, m);
    for (double x : recon.data) CHECK(x == 0.0);
}

TEST_CASE("forward ignores pixels of masked patches (mask token input)") {
    MaeShape s;
    MaeParams p = random_params(s, 10);
    SeededRng rng(10, 1);
    ImageSample a = make_image(16, 16, rng);
    ImageSample b = make_image(16, 16, rng);  // different pixels
    MaskSet all;
    all.masked.resize(16);
    std::iota(all.masked.begin(), all.masked.end(), 0);
    PatchSet ra = mae_forward(p, patchify(a, 4), all);
    PatchSet rb = mae_forward(p, patchify(b, 4), all);
    CHECK(ra.data == rb.data);  // fully masked: only the mask token is encoded
}

TEST_CASE("forward matches a step-by-step loop oracle") {
    MaeShape s;
    MaeParams p = random_params(s, 11);
    SeededRng rng(11, 1);
    ImageSample img = make_image(16, 16, rng);
    PatchSet ps = patchify(img, 4);
    MaskSet m = mask_of({1, 5, 6, 12});
    PatchSet recon = mae_forward(p, ps, m);
    const std::vector<double> masked_expect = oracle_decode(p, oracle_context(p, ps, m));
    for (int i = 0; i < ps.count(); ++i) {
        const std::vector<double> expect =
            m.is_masked(i)
                ? masked_expect
                : oracle_mlp(p, std::vector<double>(ps.patch(i).begin(), ps.patch(i).end()));
        auto got = recon.patch(i);
        for (int j = 0; j < s.patch_dim(); ++j)
            CHECK(std::abs(got[j] - expect[j]) <= 1e-12 * std::max(1.0, std::abs(expect[j])));
    }
}

TEST_CASE("masked_l1_loss hand cases") {
    PatchSet target;
    target.patch_dim = 4;
    target.data = {0.1, 0.2, 0.3, 0.4, 0.5, 0.5, 0.5, 0.5};
    PatchSet recon = target;
    MaskSet m = mask_of({1});
    CHECK(masked_l1_loss(recon, target, m) == 0.0);

    // Perturb the unmasked patch: loss must not move.
    recon.data[0] = 9.0;
    CHECK(masked_l1_loss(recon, target, m) == 0.0);

    // One masked patch of 4 pixels with recon-target = [1,-1,2,0].
    recon = target;
    recon.data[4] += 1.0;
    recon.data[5] -= 1.0;
    recon.data[6] += 2.0;
    CHECK(masked_l1_loss(recon, target, m) == doctest::Approx(1.0));

    MaskSet empty;
    CHECK_THROWS_AS(masked_l1_loss(recon, target, empty), DimensionError);
    MaskSet outish = mask_of({2});
    CHECK_THROWS_AS(masked_l1_loss(recon, target, outish), DimensionError);
}

TEST_CASE("loss depends only on masked coordinates") {
    MaeShape s;
    MaeParams p = random_params(s, 12);
    SeededRng rng(12, 1);
    ImageSample img = make_image(16, 16, rng);
    PatchSet ps = patchify(img, 4);
    MaskSet m = mask_of({2, 9, 13});
    PatchSet recon = mae_forward(p, ps, m);
    const double base = masked_l1_loss(recon, ps, m);
    for (int i = 0; i < ps.count(); ++i) {
        if (m.is_masked(i)) continue;
        PatchSet bumped = recon;
        for (auto& x : bumped.patch(i)) x += rng.uniform(-1.0, 1.0);
        CHECK(masked_l1_loss(bumped, ps, m) == base);
    }
}

TEST_CASE("grad is zero at a perfect reconstruction") {
    MaeShape s;
    MaeParams p = MaeParams::zeros(s);
    ImageSample img;
    img.height = 16;
    img.width = 16;
    img.pixels.assign(256, 0.0);  // zero model reconstructs zero images exactly
    PatchSet ps = patchify(img, 4);
    MaskSet m = mask_of({0, 4, 8});
    std::vector<MaeBatchItem> batch{{&ps, &m}};
    MaeGrad g = mae_grad(p, batch);
    CHECK(g.loss == 0.0);
    for (double x : g.grad.values) CHECK(x == 0.0);
}

TEST_CASE("grad batch-mean loss equals mean of per-sample losses") {
    MaeShape s;
    MaeParams p = random_params(s, 13);
    SeededRng rng(13, 1);
    std::vector<PatchSet> pss;
    std::vector<MaskSet> masks;
    for (int i = 0; i < 5; ++i) {
        ImageSample img = make_image(16, 16, rng);
        pss.push_back(patchify(img, 4));
        SeededRng mr = rng.derive(i);
        masks.push_back(sample_mask(16, 0.6, mr));
    }
    std::vector<MaeBatchItem> batch;
    for (int i = 0; i < 5; ++i) batch.push_back({&pss[i], &masks[i]});
    MaeGrad g = mae_grad(p, batch);
    double mean = 0.0;
    for (int i = 0; i < 5; ++i)
        mean += masked_l1_loss(mae_forward(p, pss[i], masks[i]), pss[i], masks[i]);
    mean /= 5.0;
    CHECK(g.loss == doctest::Approx(mean).epsilon(1e-12));
    CHECK(mae_batch_loss(p, batch) == doctest::Approx(mean).epsilon(1e-12));
}

TEST_CASE("duplicating the batch leaves gradient and loss bitwise unchanged") {
    MaeShape s;
    MaeParams p = random_params(s, 14);
    SeededRng rng(14, 1);
    std::vector<PatchSet> pss;
    std::vector<MaskSet> masks;
    for (int i = 0; i < 3; ++i) {
        ImageSample img = make_image(16, 16, rng);
        pss.push_back(patchify(img, 4));
        SeededRng mr = rng.derive(i);
        masks.push_back(sample_mask(16, 0.6, mr));
    }
    std::vector<MaeBatchItem> batch, doubled;
    for (int i = 0; i < 3; ++i) batch.push_back({&pss[i], &masks[i]});
    doubled = batch;
    doubled.insert(doubled.end(), batch.begin(), batch.end());

    MaeGrad g1 = mae_grad(p, batch);
    MaeGrad g2 = mae_grad(p, doubled);
    CHECK(g1.grad == g2.grad);
    CHECK(g1.loss == g2.loss);
    CHECK(mae_batch_loss(p, batch) == mae_batch_loss(p, doubled));
}

TEST_CASE("grad matches finite differences on masked-loss parameters") {
    // Small-scale spot check; the full-size sweep runs in the acceptance
    // binary. Targets sit in [0.5, 1] so no residual is near the L1 kink,
    // and the wide init keeps every layer's gradient well above the FD
    // noise floor (at 0.05 most of the network is still near-linear and
    // deep-layer gradients drown in cancellation error).
    MaeShape s{2, 6, 3, 4, 4};  // 4 patches of 4 pixels
    SeededRng pr(15, 9000);
    MaeParams p = MaeParams::init(s, pr, 0.7);
    SeededRng rng(15, 1);
    ImageSample img = make_image(4, 4, rng);
    for (auto& x : img.pixels) x = 0.5 + 0.5 * x;
    PatchSet ps = patchify(img, 2);
    MaskSet m = mask_of({1, 3});
    std::vector<MaeBatchItem> batch{{&ps, &m}};

    MaeGrad g = mae_grad(p, batch);
    ParamVector theta = p.flatten();
    const double h = 1e-6;
    // Central differences at double precision carry ~1e-10 of cancellation
    // noise, so tiny components get an absolute floor on top of the relative
    // band; the guard below makes sure the relative band binds for most
    // coordinates rather than everything hiding under the floor.
    int strict = 0;
    for (std::size_t i = 0; i < theta.size(); ++i) {
        ParamVector tp = theta, tm = theta;
        tp.values[i] += h;
        tm.values[i] -= h;
        const double lp = mae_batch_loss(MaeParams::unflatten(s, tp), batch);
        const double lm = mae_batch_loss(MaeParams::unflatten(s, tm), batch);
        const double fd = (lp - lm) / (2.0 * h);
        const double gi = g.grad.values[i];
        CHECK(std::abs(fd - gi) <= 1e-4 * std::abs(gi) + 5e-10);
        if (std::abs(gi) > 1e-4) ++strict;
    }
    CHECK(strict >= 100);
}

TEST_CASE("encode with zero params is zero; single patch equals its latent") {
    MaeShape s;
    MaeParams zero = MaeParams::zeros(s);
    SeededRng rng(16, 1);
    ImageSample img = make_image(16, 16, rng);
    PatchSet ps = patchify(img, 4);
    for (double x : mae_encode(zero, ps)) CHECK(x == 0.0);

    MaeParams p = random_params(s, 16);
    PatchSet single;
    single.patch_dim = 16;
    single.data.assign(ps.data.begin(), ps.data.begin() + 16);
    const std::vector<double> z = mae_encode(p, single);
    const std::vector<double> expect =
        oracle_latent(p, std::vector<double>(single.data.begin(), single.data.end()));
    for (int k = 0; k < s.latent; ++k)
        CHECK(std::abs(z[k] - expect[k]) <= 1e-12 * std::max(1.0, std::abs(expect[k])));
}

TEST_CASE("encode is invariant under patch permutation") {
    MaeShape s;
    MaeParams p = random_params(s, 17);
    SeededRng rng(17, 1);
    ImageSample img = make_image(16, 16, rng);
    PatchSet ps = patchify(img, 4);
    PatchSet reversed;
    reversed.patch_dim = ps.patch_dim;
    reversed.data.resize(ps.data.size());
    for (int i = 0; i < ps.count(); ++i) {
        auto src = ps.patch(i);
        std::copy(src.begin(), src.end(), reversed.patch(ps.count() - 1 - i).begin());
    }
    const std::vector<double> a = mae_encode(p, ps);
    const std::vector<double> b = mae_encode(p, reversed);
    for (int k = 0; k < s.latent; ++k)
        CHECK(std::abs(a[k] - b[k]) <= 1e-12 * std::max(1.0, std::abs(a[k])));
}

TEST_CASE("grad rejects malformed batches") {
    MaeShape s;
    MaeParams p = random_params(s, 18);
    CHECK_THROWS_AS(mae_grad(p, {}), DimensionError);

    SeededRng rng(18, 1);
    ImageSample img = make_image(16, 16, rng);
    PatchSet ps = patchify(img, 4);
    MaskSet unsorted = mask_of({5, 2});
    std::vector<MaeBatchItem> bad{{&ps, &unsorted}};
    CHECK_THROWS_AS(mae_grad(p, bad), DimensionError);
    MaskSet empty;
    std::vector<MaeBatchItem> none{{&ps, &empty}};
    CHECK_THROWS_AS(mae_grad(p, none), DimensionError);
}
