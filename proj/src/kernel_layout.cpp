#include "mcf/kernel_layout.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mcf/rng.hpp"
#include "mcf/simd.hpp"

namespace mcf {

namespace {

bool is_pow2(int n) { return n >= 1 && (n & (n - 1)) == 0; }

// Grid shape: among column counts whose 2*rows_k x cols grid fits the
// plane, minimize empty slots, then |rows-cols|, then prefer the wider
// grid. 48 kernels land on the wide 8x12 arrangement when space
// permits and degrade to 10x10 when the plane is tight.
void choose_grid(int kernel_count, int tile, int n, int& grid_rows, int& grid_cols) {
    int max_per_dim = n / tile;
    long best_waste = std::numeric_limits<long>::max();
    int best_sq = 0, best_cols = -1, best_rows = 0;
    for (int cols = 1; cols <= max_per_dim; ++cols) {
        int rows_k = (kernel_count + cols - 1) / cols;
        int rows = 2 * rows_k;
        if (rows > max_per_dim) continue;
        long waste = long(rows_k) * cols - kernel_count;
        int sq = std::abs(rows - cols);
        if (waste < best_waste || (waste == best_waste && sq < best_sq) ||
            (waste == best_waste && sq == best_sq && cols > best_cols)) {
            best_waste = waste;
            best_sq = sq;
            best_cols = cols;
            best_rows = rows;
        }
    }
    if (best_cols < 0)
        throw LayoutError("cannot place " + std::to_string(2 * kernel_count) + " tiles of size " +
                          std::to_string(tile) + " disjointly in a " + std::to_string(n) + "x" +
                          std::to_string(n) + " plane");
    grid_rows = best_rows;
    grid_cols = best_cols;
}

}  // namespace

void KernelSet::validate(const char* what) const {
    if (w.empty()) throw InvalidInput(std::string(what) + ": needs at least one kernel");
    if (k < 1 || k % 2 == 0) throw InvalidInput(std::string(what) + ": k must be odd");
    if (channels < 1) throw InvalidInput(std::string(what) + ": needs at least one channel");
    for (const auto& kern : w) {
        if (int(kern.size()) != channels)
            throw InvalidInput(std::string(what) + ": channel count mismatch");
        for (const auto& ch : kern)
            if (ch.rows != k || ch.cols != k)
                throw InvalidInput(std::string(what) + ": kernel shape mismatch");
    }
}

std::pair<KernelSet, KernelSet> split_pos_neg(const KernelSet& kernels) {
    kernels.validate("split_pos_neg");
    KernelSet pos = kernels, neg = kernels;
    for (int j = 0; j < kernels.count(); ++j) {
        for (int c = 0; c < kernels.channels; ++c) {
            for (std::size_t i = 0; i < kernels.w[j][c].size(); ++i) {
                double v = kernels.w[j][c].data()[i];
                pos.w[j][c].data()[i] = v > 0 ? v : 0.0;
                neg.w[j][c].data()[i] = v < 0 ? -v : 0.0;
            }
        }
    }
    return {pos, neg};
}

TileLayout make_tile_layout(int kernel_count, int k, int pad, int n) {
    if (kernel_count < 1 || k < 1 || k % 2 == 0)
        throw InvalidInput("make_tile_layout: need >= 1 kernels of odd size");
    if (pad < 0) throw InvalidInput("make_tile_layout: pad must be >= 0");
    if (n < 2 || !is_pow2(n))
        throw InvalidInput("make_tile_layout: n must be a power of two >= 2");

    TileLayout layout;
    layout.n = n;
    layout.k = k;
    layout.pad = pad;
    layout.tile_size = k + 2 * pad;
    layout.kernel_count = kernel_count;
    choose_grid(kernel_count, layout.tile_size, n, layout.grid_rows, layout.grid_cols);

    int tile = layout.tile_size;
    int top = (n - layout.grid_rows * tile) / 2;
    int left = (n - layout.grid_cols * tile) / 2;
    int rows_k = layout.grid_rows / 2;
    auto center_of = [&](int gr, int gc) {
        return std::pair<int, int>{top + gr * tile + (tile - 1) / 2,
                                   left + gc * tile + (tile - 1) / 2};
    };
    for (int pass = 0; pass < 2; ++pass) {
        for (int j = 0; j < kernel_count; ++j) {
            Tile t;
            t.kernel = j;
            t.positive = (pass == 0);
            t.grid_r = j / layout.grid_cols + (pass == 0 ? 0 : rows_k);
            t.grid_c = j % layout.grid_cols;
            auto [cr, cc] = center_of(t.grid_r, t.grid_c);
            t.center_r = cr;
            t.center_c = cc;
            layout.tiles.push_back(t);
        }
    }
    return layout;
}

TargetPsf build_target_psf(const KernelSet& kernels, int pad, int n) {
    kernels.validate("build_target_psf");
    TileLayout layout = make_tile_layout(kernels.count(), kernels.k, pad, n);

    auto [pos, neg] = split_pos_neg(kernels);
    TargetPsf target;
    target.n = n;
    target.channels.assign(kernels.channels, RealGrid(n, n));
    int ko = (kernels.k - 1) / 2;
    auto stamp = [&](const RealGrid& sub, int cr, int cc, int c) {
        for (int r = 0; r < kernels.k; ++r)
            for (int q = 0; q < kernels.k; ++q)
                target.channels[c](cr - ko + r, cc - ko + q) = sub(r, q);
    };
    for (int j = 0; j < kernels.count(); ++j) {
        for (int c = 0; c < kernels.channels; ++c) {
            stamp(pos.w[j][c], layout.pos_tile(j).center_r, layout.pos_tile(j).center_c, c);
            stamp(neg.w[j][c], layout.neg_tile(j).center_r, layout.neg_tile(j).center_c, c);
        }
    }

    double want = double(n) * double(n);
    layout.norm_scale.resize(kernels.channels, 1.0);
    const auto& sk = simd::active();
    for (int c = 0; c < kernels.channels; ++c) {
        double total = sk.sum(target.channels[c].data(), target.channels[c].size());
        // an all-zero channel has no meaningful scale; left untouched
        double s = total > 0 ? want / total : 1.0;
        layout.norm_scale[c] = s;
        sk.scale(s, target.channels[c].data(), target.channels[c].size());
    }
    double mean = 0.0;
    for (double s : layout.norm_scale) mean += s;
    layout.norm_scale_mean = mean / double(kernels.channels);

    target.layout = layout;
    return target;
}

std::vector<RealGrid> unnormalized_target(const TargetPsf& target) {
    std::vector<RealGrid> raw = target.channels;
    for (std::size_t c = 0; c < raw.size(); ++c)
        simd::active().scale(1.0 / target.layout.norm_scale[c], raw[c].data(), raw[c].size());
    return raw;
}

std::vector<RealGrid> extract_feature_map(const RealGrid& sensor, const TileLayout& layout,
                                          int s) {
    if (s < 1) throw InvalidInput("extract_feature_map: window size must be positive");
    if (sensor.rows != layout.n || sensor.cols != layout.n)
        throw InvalidInput("extract_feature_map: sensor plane does not match layout");
    if (s > layout.tile_size)
        throw LayoutError("extract_feature_map: window " + std::to_string(s) +
                          " exceeds tile spacing " + std::to_string(layout.tile_size) +
                          ", per-kernel windows would overlap");

    // A scene of size s embeds at offset e; the window of a tile starts
    // at centre + e - n/2 so window pixel (r,c) lines up with scene
    // pixel (r,c) of the same-padded convolution.
    int e = (layout.n - s) / 2;
    std::vector<RealGrid> features;
    features.reserve(layout.kernel_count);
    for (int j = 0; j < layout.kernel_count; ++j) {
        const Tile& tp = layout.pos_tile(j);
        const Tile& tn = layout.neg_tile(j);
        int pr = tp.center_r + e - layout.n / 2, pc = tp.center_c + e - layout.n / 2;
        int nr = tn.center_r + e - layout.n / 2, nc = tn.center_c + e - layout.n / 2;
        if (pr < 0 || pc < 0 || nr < 0 || nc < 0 || pr + s > layout.n || pc + s > layout.n ||
            nr + s > layout.n || nc + s > layout.n)
            throw LayoutError("extract_feature_map: window leaves the sensor plane");
        RealGrid f(s, s);
        for (int r = 0; r < s; ++r)
            for (int c = 0; c < s; ++c)
                f(r, c) = sensor(pr + r, pc + c) - sensor(nr + r, nc + c);
        features.push_back(std::move(f));
    }
    return features;
}

RealGrid scatter_feature_gradient(const std::vector<RealGrid>& dfeatures,
                                  const TileLayout& layout, int s) {
    if (s < 1) throw InvalidInput("scatter_feature_gradient: window size must be positive");
    if (int(dfeatures.size()) != layout.kernel_count)
        throw InvalidInput("scatter_feature_gradient: gradient count does not match the layout");
    if (s > layout.tile_size)
        throw LayoutError("scatter_feature_gradient: window " + std::to_string(s) +
                          " exceeds tile spacing " + std::to_string(layout.tile_size));
    int e = (layout.n - s) / 2;
    RealGrid up(layout.n, layout.n);
    for (int j = 0; j < layout.kernel_count; ++j) {
        const RealGrid& g = dfeatures[j];
        if (g.rows != s || g.cols != s)
            throw InvalidInput("scatter_feature_gradient: gradient shape mismatch");
        const Tile& tp = layout.pos_tile(j);
        const Tile& tn = layout.neg_tile(j);
        int pr = tp.center_r + e - layout.n / 2, pc = tp.center_c + e - layout.n / 2;
        int nr = tn.center_r + e - layout.n / 2, nc = tn.center_c + e - layout.n / 2;
        if (pr < 0 || pc < 0 || nr < 0 || nc < 0 || pr + s > layout.n || pc + s > layout.n ||
            nr + s > layout.n || nc + s > layout.n)
            throw LayoutError("scatter_feature_gradient: window leaves the sensor plane");
        for (int r = 0; r < s; ++r)
            for (int c = 0; c < s; ++c) {
                up(pr + r, pc + c) += g(r, c);
                up(nr + r, nc + c) -= g(r, c);
            }
    }
    return up;
}

KernelSet make_filter_bank(int count, int channels, uint64_t seed) {
    if (count < 1 || channels < 1) throw InvalidInput("make_filter_bank: count and channels must be positive");
    static const double base[5][9] = {
        {-1, 0, 1, -2, 0, 2, -1, 0, 1},   // vertical edge
        {-1, -2, -1, 0, 0, 0, 1, 2, 1},   // horizontal edge
        {0, -1, 0, -1, 4, -1, 0, -1, 0},  // center-surround
        {1, 2, 1, 2, 4, 2, 1, 2, 1},      // blob
        {2, 1, 0, 1, 0, -1, 0, -1, -2},   // diagonal edge
    };
    KernelSet ks;
    ks.k = 3;
    ks.channels = channels;
    ks.w.reserve(std::size_t(count));
    for (int j = 0; j < count; ++j) {
        std::vector<RealGrid> per;
        per.reserve(std::size_t(channels));
        for (int c = 0; c < channels; ++c) {
            uint64_t stream = rng::stream::kKernelInit + uint64_t(j) * uint64_t(channels) + uint64_t(c);
            double w0 = 2.0 * rng::uniform(seed, stream, 0) - 1.0;
            double w1 = 2.0 * rng::uniform(seed, stream, 1) - 1.0;
            auto b0 = rng::below(seed, stream, 2, 5);
            auto b1 = rng::below(seed, stream, 3, 5);
            RealGrid g(3, 3);
            for (int i = 0; i < 9; ++i) g.v[std::size_t(i)] = w0 * base[b0][i] + 0.4 * w1 * base[b1][i];
            per.push_back(std::move(g));
        }
        ks.w.push_back(std::move(per));
    }
    return ks;
}

}  // namespace mcf
