#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "fedmae/image.hpp"
#include "fedmae/partition.hpp"

namespace fedmae {

// Two-domain synthetic dataset. Each class has a low-rank template (outer
// product of per-cell factors) modulated by a +/- checkerboard at cell
// granularity. With the cell equal to the model patch size and an even cell
// grid, every class has the same patch-averaged image, so class identity is
// invisible to first-order patch statistics and a probe on an untrained
// encoder scores at chance. Domain B gets partially remixed factors, an
// intensity shift, and scaled noise.
struct SynthSpec {
    int classes = 8;           // C
    int per_class = 150;       // images per class per domain
    int height = 16;
    int width = 16;
    int cell = 4;              // pattern cell; align to model patch size
    double template_amp = 0.4;
    double noise_sigma = 0.05;
    double domain_shift = 0.12;    // added to domain-B pixels
    double domain_contrast = 1.6;  // noise scale factor for domain B
    double pattern_mix = 0.3;      // 0 = domain B reuses domain-A factors
    std::uint64_t seed = 1;

    void validate() const;  // throws ConfigError
    bool operator==(const SynthSpec&) const = default;
};

// Template in [0,1] before shift and noise.
std::vector<double> class_template(const SynthSpec& spec, int label, char domain);

// All images: domain A first, then domain B; within a domain, classes in
// order, per_class images each. The position in this vector is the sample id.
std::vector<ImageSample> generate_synth(const SynthSpec& spec);

// Pools of sample ids by domain tag.
std::pair<DatasetPool, DatasetPool> make_pools(const std::vector<ImageSample>& images);

}  // namespace fedmae
