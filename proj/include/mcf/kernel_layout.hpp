#pragma once

#include <utility>
#include <vector>

#include "mcf/grid.hpp"

namespace mcf {

// Conv-layer weights: count() kernels, each channels deep, k odd.
struct KernelSet {
    int k = 0;
    int channels = 0;
    std::vector<std::vector<RealGrid>> w;  // [kernel][channel], each k x k

    int count() const { return int(w.size()); }
    void validate(const char* what = "KernelSet") const;
};

struct Tile {
    int kernel = 0;
    bool positive = true;
    int grid_r = 0, grid_c = 0;
    int center_r = 0, center_c = 0;  // plane coordinates
};

// Where each signed sub-kernel sits in the PSF plane. Positive tiles
// fill the top half of the grid row-major by kernel index, negative
// tiles repeat the pattern below. Tile centres are spaced exactly
// tile_size apart, so tiles never overlap.
struct TileLayout {
    int n = 0;
    int k = 0;
    int pad = 0;
    int tile_size = 0;  // k + 2*pad
    int grid_rows = 0, grid_cols = 0;
    int kernel_count = 0;
    std::vector<Tile> tiles;         // positives first, then negatives
    std::vector<double> norm_scale;  // per-channel target scale factor
    double norm_scale_mean = 1.0;    // single de-scaling factor for captures

    const Tile& pos_tile(int j) const { return tiles[j]; }
    const Tile& neg_tile(int j) const { return tiles[std::size_t(kernel_count) + j]; }
};

// Optimization target: per channel, every signed sub-kernel stamped at
// its tile centre, then the channel rescaled to total energy n^2 (the
// energy a unit-modulus transfer function always delivers). The applied
// scale lives in layout.norm_scale.
struct TargetPsf {
    int n = 0;
    std::vector<RealGrid> channels;
    TileLayout layout;
};

// Elementwise positive and negative parts: first = max(w, 0),
// second = max(-w, 0), so w = first - second.
std::pair<KernelSet, KernelSet> split_pos_neg(const KernelSet& kernels);

// Seeded 3x3 bank of oriented-edge / center-surround / blob mixtures,
// the structure a trained first conv layer typically shows. Useful as a
// realistic optimization target when no trained weights are at hand.
KernelSet make_filter_bank(int count, int channels, uint64_t seed);

// Tile placement alone, no kernels involved; norm_scale fields keep
// their defaults. Throws LayoutError when the tiles cannot be placed
// disjointly.
TileLayout make_tile_layout(int kernel_count, int k, int pad, int n);

// Lays out 2*count() tiles in an n-by-n plane and builds the target.
// Throws LayoutError when the tiles cannot be placed disjointly.
TargetPsf build_target_psf(const KernelSet& kernels, int pad, int n);

// The tiling with per-channel normalization undone: exactly the signed
// sub-kernels at their tile centres, zero elsewhere.
std::vector<RealGrid> unnormalized_target(const TargetPsf& target);

// Per-kernel s-by-s output windows: window at the positive tile minus
// window at the negative tile. Channel summation already happened on
// the sensor, so none is applied here; no normalization is undone.
// Throws LayoutError when s exceeds the tile spacing (windows would
// overlap neighbouring tiles' outputs).
std::vector<RealGrid> extract_feature_map(const RealGrid& sensor, const TileLayout& layout,
                                          int s);

// Adjoint of extract_feature_map: routes per-kernel window gradients back
// onto the sensor plane (+ at the positive tile, - at the negative one).
RealGrid scatter_feature_gradient(const std::vector<RealGrid>& dfeatures,
                                  const TileLayout& layout, int s);

}  // namespace mcf
