#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fedmae/rng.hpp"

namespace fedmae {

// H x W grid of pixel intensities in [0, 1], row-major.
struct ImageSample {
    int height = 0;
    int width = 0;
    std::vector<double> pixels;
    char domain = 'A';  // 'A' or 'B'
    int label = 0;

    double at(int y, int x) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

// Non-overlapping p x p patches in row-major patch order; each patch is a
// flat vector of p*p pixels (row-major within the patch). Concatenating the
// patches back in order reconstructs the image exactly.
struct PatchSet {
    int patch_dim = 0;          // p*p
    std::vector<double> data;   // count() * patch_dim

    int count() const { return patch_dim == 0 ? 0 : static_cast<int>(data.size()) / patch_dim; }
    std::span<const double> patch(int i) const {
        return {data.data() + static_cast<std::size_t>(i) * patch_dim,
                static_cast<std::size_t>(patch_dim)};
    }
    std::span<double> patch(int i) {
        return {data.data() + static_cast<std::size_t>(i) * patch_dim,
                static_cast<std::size_t>(patch_dim)};
    }
};

// Sorted, unique patch indices hidden from the model.
struct MaskSet {
    std::vector<int> masked;  // sorted ascending

    bool is_masked(int idx) const;
    int count() const { return static_cast<int>(masked.size()); }
};

PatchSet patchify(const ImageSample& img, int patch_size);

// Inverse of patchify; used to check losslessness.
ImageSample unpatchify(const PatchSet& ps, int patch_size, int height, int width);

// Draw exactly P - round((1-ratio)*P) distinct indices uniformly without
// replacement. ratio must lie in (0, 1) and P >= 2.
MaskSet sample_mask(int patch_count, double ratio, SeededRng& rng);

}  // namespace fedmae
