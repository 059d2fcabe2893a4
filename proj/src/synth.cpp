#include "fedmae/synth.hpp"

#include <algorithm>
#include <cmath>

#include "fedmae/errors.hpp"

namespace fedmae {
namespace {

double clip01(double x) { return std::min(1.0, std::max(0.0, x)); }

// Per-tile gain: mostly positive, with a strong negative tile every fourth
// cell. Majority-positive gains keep robust per-tile statistics (medians)
// class-specific, while the near-cancelling sum keeps the image-wide average
// from giving the class away to a plain global-mean readout.
double tile_gain(int k) {
    static const double pattern[4] = {0.9, 0.5, 0.4, -1.5};
    return pattern[k % 4];
}

// Full-length factor: per-cell pattern u tiled along the axis, each tile
// scaled by tile_gain. Tiles carry the same motif at varying strength, so
// local structure stays class-specific everywhere in the image.
std::vector<double> expand_factor(const std::vector<double>& u, int length, int cell) {
    std::vector<double> out(length);
    for (int i = 0; i < length; ++i) out[i] = tile_gain(i / cell) * u[i % cell];
    return out;
}

std::vector<double> draw_factor(SeededRng& rng, int cell) {
    std::vector<double> u(cell);
    for (double& x : u) x = rng.uniform(-1.0, 1.0);
    return u;
}

}  // namespace

void SynthSpec::validate() const {
    if (classes < 1) throw ConfigError("synth: classes must be >= 1");
    if (per_class < 1) throw ConfigError("synth: per_class must be >= 1");
    if (height < 1 || width < 1) throw ConfigError("synth: image dimensions must be positive");
    if (cell < 1 || cell > height || cell > width)
        throw ConfigError("synth: cell must lie in [1, min(height, width)]");
    if (!(noise_sigma >= 0.0)) throw ConfigError("synth: noise_sigma must be >= 0");
    if (!(template_amp >= 0.0)) throw ConfigError("synth: template_amp must be >= 0");
    if (!(pattern_mix >= 0.0 && pattern_mix <= 1.0))
        throw ConfigError("synth: pattern_mix must lie in [0, 1]");
    if (!(domain_contrast >= 0.0)) throw ConfigError("synth: domain_contrast must be >= 0");
}

std::vector<double> class_template(const SynthSpec& spec, int label, char domain) {
    spec.validate();
    if (label < 0 || label >= spec.classes) throw ConfigError("synth: label out of range");
    if (domain != 'A' && domain != 'B') throw ConfigError("synth: domain must be 'A' or 'B'");

    SeededRng rng_a = SeededRng(spec.seed, streams::kSynth).derive(0).derive(label);
    std::vector<double> u = draw_factor(rng_a, spec.cell);
    std::vector<double> v = draw_factor(rng_a, spec.cell);
    if (domain == 'B') {
        SeededRng rng_b = SeededRng(spec.seed, streams::kSynth).derive(1).derive(label);
        const std::vector<double> ub = draw_factor(rng_b, spec.cell);
        const std::vector<double> vb = draw_factor(rng_b, spec.cell);
        for (int i = 0; i < spec.cell; ++i) {
            u[i] = (1.0 - spec.pattern_mix) * u[i] + spec.pattern_mix * ub[i];
            v[i] = (1.0 - spec.pattern_mix) * v[i] + spec.pattern_mix * vb[i];
        }
    }
    const std::vector<double> U = expand_factor(u, spec.height, spec.cell);
    const std::vector<double> V = expand_factor(v, spec.width, spec.cell);

    std::vector<double> t(static_cast<std::size_t>(spec.height) * spec.width);
    for (int y = 0; y < spec.height; ++y)
        for (int x = 0; x < spec.width; ++x)
            t[static_cast<std::size_t>(y) * spec.width + x] =
                clip01(0.5 + spec.template_amp * U[y] * V[x]);
    return t;
}

std::vector<ImageSample> generate_synth(const SynthSpec& spec) {
    spec.validate();
    std::vector<ImageSample> out;
    out.reserve(static_cast<std::size_t>(2) * spec.classes * spec.per_class);
    SeededRng noise_root = SeededRng(spec.seed, streams::kSynth).derive(2);

    for (int dom = 0; dom < 2; ++dom) {
        const char domain = dom == 0 ? 'A' : 'B';
        const double shift = dom == 0 ? 0.0 : spec.domain_shift;
        const double contrast = dom == 0 ? 1.0 : spec.domain_contrast;
        for (int c = 0; c < spec.classes; ++c) {
            const std::vector<double> tmpl = class_template(spec, c, domain);
            SeededRng class_rng = noise_root.derive(dom).derive(c);
            for (int i = 0; i < spec.per_class; ++i) {
                SeededRng rng = class_rng.derive(i);
                ImageSample img;
                img.height = spec.height;
                img.width = spec.width;
                img.domain = domain;
                img.label = c;
                img.pixels.resize(tmpl.size());
                if (spec.noise_sigma == 0.0) {
                    for (std::size_t j = 0; j < tmpl.size(); ++j)
                        img.pixels[j] = clip01(tmpl[j] + shift);
                } else {
                    for (std::size_t j = 0; j < tmpl.size(); ++j)
                        img.pixels[j] = clip01(tmpl[j] + shift +
                                               contrast * spec.noise_sigma * rng.next_gaussian());
                }
                out.push_back(std::move(img));
            }
        }
    }
    return out;
}

std::pair<DatasetPool, DatasetPool> make_pools(const std::vector<ImageSample>& images) {
    DatasetPool a, b;
    a.domain = 'A';
    b.domain = 'B';
    for (std::size_t i = 0; i < images.size(); ++i)
        (images[i].domain == 'A' ? a : b).ids.push_back(static_cast<SampleId>(i));
    return {a, b};
}

}  // namespace fedmae
