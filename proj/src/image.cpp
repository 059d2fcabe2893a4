#include "fedmae/image.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedmae/errors.hpp"

namespace fedmae {

bool MaskSet::is_masked(int idx) const {
    return std::binary_search(masked.begin(), masked.end(), idx);
}

PatchSet patchify(const ImageSample& img, int patch_size) {
    if (patch_size <= 0) throw DimensionError("patchify: patch size must be positive");
    if (img.height <= 0 || img.width <= 0 ||
        img.pixels.size() != static_cast<std::size_t>(img.height) * img.width)
        throw DimensionError("patchify: pixel buffer does not match height*width");
    if (img.height % patch_size != 0 || img.width % patch_size != 0)
        throw DimensionError("patchify: image dimensions not divisible by patch size");

    const int p = patch_size;
    const int gy = img.height / p;
    const int gx = img.width / p;
    PatchSet ps;
    ps.patch_dim = p * p;
    ps.data.resize(static_cast<std::size_t>(gy) * gx * ps.patch_dim);
    for (int py = 0; py < gy; ++py)
        for (int px = 0; px < gx; ++px) {
            auto out = ps.patch(py * gx + px);
            for (int a = 0; a < p; ++a)
                for (int b = 0; b < p; ++b)
                    out[a * p + b] = img.at(py * p + a, px * p + b);
        }
    return ps;
}

ImageSample unpatchify(const PatchSet& ps, int patch_size, int height, int width) {
    const int p = patch_size;
    if (p <= 0 || ps.patch_dim != p * p)
        throw DimensionError("unpatchify: patch_dim does not match patch size");
    if (height % p != 0 || width % p != 0)
        throw DimensionError("unpatchify: image dimensions not divisible by patch size");
    const int gy = height / p;
    const int gx = width / p;
    if (ps.count() != gy * gx)
        throw DimensionError("unpatchify: patch count does not match image dimensions");

    ImageSample img;
    img.height = height;
    img.width = width;
    img.pixels.resize(static_cast<std::size_t>(height) * width);
    for (int py = 0; py < gy; ++py)
        for (int px = 0; px < gx; ++px) {
            auto in = ps.patch(py * gx + px);
            for (int a = 0; a < p; ++a)
                for (int b = 0; b < p; ++b)
                    img.pixels[static_cast<std::size_t>(py * p + a) * width + px * p + b] =
                        in[a * p + b];
        }
    return img;
}

MaskSet sample_mask(int patch_count, double ratio, SeededRng& rng) {
    if (patch_count < 2) throw DimensionError("sample_mask: need at least 2 patches");
    if (!(ratio > 0.0 && ratio < 1.0))
        throw ConfigError("sample_mask: mask ratio must lie in (0, 1)");

    const int kept = static_cast<int>(std::lround((1.0 - ratio) * patch_count));
    const int n_masked = patch_count - kept;
    if (n_masked < 1 || n_masked >= patch_count)
        throw ConfigError("sample_mask: ratio leaves no masked or no kept patches");

    // Partial Fisher-Yates: the first n_masked slots form a uniform sample
    // without replacement.
    std::vector<int> idx(patch_count);
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 0; i < n_masked; ++i) {
        const int j = i + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(patch_count - i)));
        std::swap(idx[i], idx[j]);
    }
    MaskSet m;
    m.masked.assign(idx.begin(), idx.begin() + n_masked);
    std::sort(m.masked.begin(), m.masked.end());
    return m;
}

}  // namespace fedmae
