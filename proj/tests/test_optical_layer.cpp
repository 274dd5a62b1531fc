#include "mcf/optical_layer.hpp"

#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "mcf/errors.hpp"
#include "mcf/fft.hpp"
#include "mcf/kernel_layout.hpp"
#include "oracles.hpp"

using namespace mcf;

namespace {

CrossTalkMatrix identity_xtalk(int c) {
    CrossTalkMatrix x;
    x.entries = Grid<double>(c, c);
    for (int i = 0; i < c; ++i) x.entries(i, i) = 1.0;
    return x;
}

CrossTalkMatrix matrix_xtalk(Grid<double> a) {
    CrossTalkMatrix x;
    x.entries = std::move(a);
    return x;
}

PhaseProfile random_phase(int n, int channels, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(0.0, 6.283185307179586);
    PhaseProfile p;
    p.n = n;
    for (int c = 0; c < channels; ++c) {
        RealGrid g(n, n);
        for (auto& v : g.v) v = dist(rng);
        p.channels.push_back(std::move(g));
    }
    return p;
}

SceneImage random_scene(int s, int channels, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    SceneImage scene;
    scene.size = s;
    for (int c = 0; c < channels; ++c) {
        RealGrid g(s, s);
        for (auto& v : g.v) v = dist(rng);
        scene.channels.push_back(std::move(g));
    }
    return scene;
}

KernelSet random_kernels(int count, int k, int channels, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    KernelSet ks;
    ks.k = k;
    ks.channels = channels;
    for (int j = 0; j < count; ++j) {
        std::vector<RealGrid> ch;
        for (int c = 0; c < channels; ++c) {
            RealGrid g(k, k);
            for (auto& v : g.v) v = dist(rng);
            ch.push_back(std::move(g));
        }
        ks.w.push_back(std::move(ch));
    }
    return ks;
}

NoiseModel noise_off() {
    NoiseModel n;
    n.proportionality = 0.0;
    return n;
}

double grid_dot(const RealGrid& a, const RealGrid& b) {
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) acc += a.v[i] * b.v[i];
    return acc;
}

}  // namespace

TEST_CASE("effective PSFs: identity mixing is exact pass-through") {
    auto phase = random_phase(16, 3, 11);
    auto raw = psf_from_phase(phase);
    auto eff = effective_psfs(phase, identity_xtalk(3));
    REQUIRE(eff.values.size() == 3);
    for (int c = 0; c < 3; ++c)
        for (size_t i = 0; i < raw.channels[c].size(); ++i)
            CHECK(eff.values[c].v[i] == raw.channels[c].v[i]);
}

TEST_CASE("effective PSFs: single nonzero row makes every channel proportional") {
    auto phase = random_phase(16, 3, 12);
    auto raw = psf_from_phase(phase);
    Grid<double> a(3, 3);
    a(1, 0) = 0.5;
    a(1, 1) = 1.0;
    a(1, 2) = 2.0;
    auto eff = effective_psfs(phase, matrix_xtalk(a));
    for (size_t i = 0; i < raw.channels[1].size(); ++i) {
        CHECK(eff.values[0].v[i] == 0.5 * raw.channels[1].v[i]);
        CHECK(eff.values[1].v[i] == raw.channels[1].v[i]);
        CHECK(eff.values[2].v[i] == 2.0 * raw.channels[1].v[i]);
    }
}

TEST_CASE("effective PSFs: random mixing matches the direct weighted sum") {
    auto phase = random_phase(8, 3, 13);
    auto raw = psf_from_phase(phase);
    std::mt19937_64 rng(14);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    Grid<double> a(3, 3);
    for (auto& v : a.v) v = dist(rng);
    auto eff = effective_psfs(phase, matrix_xtalk(a));
    for (int c = 0; c < 3; ++c)
        for (int r = 0; r < 8; ++r)
            for (int q = 0; q < 8; ++q) {
                double want = 0.0;
                for (int cp = 0; cp < 3; ++cp) want += a(cp, c) * raw.channels[cp](r, q);
                CHECK(eff.values[c](r, q) ==
                      doctest::Approx(want).epsilon(1e-12));
            }
    for (const auto& g : eff.values)
        for (double v : g.v) CHECK(v >= 0.0);
}

TEST_CASE("optical forward: black scene gives exactly zero with noise off") {
    auto phase = random_phase(32, 2, 15);
    SceneImage black;
    black.size = 8;
    black.channels.assign(2, RealGrid(8, 8));
    auto img = optical_forward(black, phase, identity_xtalk(2), noise_off());
    for (double v : img.values.v) CHECK(v == 0.0);
}

TEST_CASE("optical forward: centred single-pixel scene reproduces the PSF") {
    auto kernels = random_kernels(4, 3, 3, 16);
    auto target = build_target_psf(kernels, 4, 64);

    SceneImage delta;
    delta.size = 16;
    delta.channels.assign(3, RealGrid(16, 16));
    delta.channels[1](8, 8) = 1.0;

    auto spectra = precompute_psf_spectra(
        mix_psfs(target.channels, identity_xtalk(3)));
    auto out = forward_clean(spectra, scene_spectra(delta, 64));
    CHECK(oracle::rel_l2(out, target.channels[1]) < 1e-10);
}

TEST_CASE("optical forward: matches the direct spatial-domain oracle") {
    const int n = 32, s = 8;
    auto scenes = random_scene(s, 2, 17);
    std::mt19937_64 rng(18);
    std::vector<RealGrid> raw(2, RealGrid(n, n));
    for (auto& g : raw) oracle::fill_random(g, rng, 0.0, 1.0);
    Grid<double> a(2, 2);
    a(0, 0) = 0.9;
    a(0, 1) = 0.2;
    a(1, 0) = 0.1;
    a(1, 1) = 0.8;

    auto eff = mix_psfs(raw, matrix_xtalk(a));
    auto out = forward_clean(precompute_psf_spectra(eff), scene_spectra(scenes, n));

    RealGrid want(n, n);
    for (int c = 0; c < 2; ++c) {
        auto part = oracle::image_conv(eff.values[c], scenes.channels[c]);
        for (size_t i = 0; i < want.size(); ++i) want.v[i] += part.v[i];
    }
    CHECK(oracle::rel_l2(out, want) < 1e-12);
}

TEST_CASE("optical forward: exact tiling reproduces the digital convolution") {
    const int n = 128, s = 16;
    auto kernels = random_kernels(8, 3, 3, 19);
    auto target = build_target_psf(kernels, 8, n);
    auto scene = random_scene(s, 3, 20);

    auto spectra = precompute_psf_spectra(
        mix_psfs(unnormalized_target(target), identity_xtalk(3)));
    auto clean = forward_clean(spectra, scene_spectra(scene, n));
    auto features = extract_feature_map(clean, target.layout, s);

    REQUIRE(features.size() == 8);
    std::vector<RealGrid> want;
    for (int j = 0; j < 8; ++j)
        want.push_back(oracle::conv_same_channels(scene.channels, kernels.w[j]));
    CHECK(oracle::rel_l2_stack(features, want) < 1e-10);
}

TEST_CASE("optical forward: linear in the scene with noise off") {
    const int n = 32, s = 8;
    std::mt19937_64 rng(21);
    std::vector<RealGrid> raw(3, RealGrid(n, n));
    for (auto& g : raw) oracle::fill_random(g, rng, 0.0, 1.0);
    Grid<double> a(3, 3);
    for (auto& v : a.v) v = 0.1;
    for (int i = 0; i < 3; ++i) a(i, i) = 1.0;
    auto spectra = precompute_psf_spectra(mix_psfs(raw, matrix_xtalk(a)));

    auto x = random_scene(s, 3, 22);
    auto y = random_scene(s, 3, 23);
    SceneImage mix;
    mix.size = s;
    for (int c = 0; c < 3; ++c) {
        RealGrid g(s, s);
        for (size_t i = 0; i < g.size(); ++i)
            g.v[i] = 0.3 * x.channels[c].v[i] + 1.2 * y.channels[c].v[i];
        mix.channels.push_back(std::move(g));
    }

    auto fx = forward_clean(spectra, scene_spectra(x, n));
    auto fy = forward_clean(spectra, scene_spectra(y, n));
    auto fmix = forward_clean(spectra, scene_spectra(mix, n));
    RealGrid want(n, n);
    for (size_t i = 0; i < want.size(); ++i)
        want.v[i] = 0.3 * fx.v[i] + 1.2 * fy.v[i];
    CHECK(oracle::rel_l2(fmix, want) < 1e-10);
}

TEST_CASE("optical backward: zero upstream gradient gives zero phase gradient") {
    auto phase = random_phase(16, 2, 24);
    auto scene = random_scene(8, 2, 25);
    RealGrid zero(16, 16);
    auto g = optical_backward(scene, phase, identity_xtalk(2), zero);
    REQUIRE(g.size() == 2);
    for (const auto& ch : g)
        for (double v : ch.v) CHECK(v == 0.0);
}

TEST_CASE("optical backward: matches central finite differences") {
    const int n = 8, s = 4;
    auto phase = random_phase(n, 1, 26);
    auto scene = random_scene(s, 1, 27);
    Grid<double> a(1, 1);
    a(0, 0) = 0.8;
    auto xt = matrix_xtalk(a);

    RealGrid g(n, n);
    std::mt19937_64 rng(28);
    oracle::fill_random(g, rng);

    auto loss_of = [&](const PhaseProfile& p) {
        auto spectra = precompute_psf_spectra(effective_psfs(p, xt));
        auto out = forward_clean(spectra, scene_spectra(scene, n));
        return grid_dot(g, out);
    };

    auto grad = optical_backward(scene, phase, xt, g);
    REQUIRE(grad.size() == 1);

    const double h = 1e-5;
    double gmax = 0.0;
    for (double v : grad[0].v) gmax = std::max(gmax, std::abs(v));
    REQUIRE(gmax > 0.0);
    for (int i = 0; i < n * n; ++i) {
        auto p = phase;
        p.channels[0].v[i] += h;
        double up = loss_of(p);
        p.channels[0].v[i] -= 2 * h;
        double dn = loss_of(p);
        double fd = (up - dn) / (2 * h);
        CHECK(std::abs(fd - grad[0].v[i]) <= 1e-5 * gmax);
    }
}

TEST_CASE("optical backward: adjoint identity against a forward differential") {
    const int n = 8, s = 4, c = 2;
    auto phase = random_phase(n, c, 29);
    auto scene = random_scene(s, c, 30);
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    Grid<double> a(c, c);
    for (auto& v : a.v) v = dist(rng);
    auto xt = matrix_xtalk(a);

    RealGrid g(n, n);
    oracle::fill_random(g, rng);
    std::vector<RealGrid> dphi(c, RealGrid(n, n));
    for (auto& ch : dphi) oracle::fill_random(ch, rng);

    // Forward differential of the PSF map, built from first principles:
    // dt = i dphi * t, du = F^-1 dt, dpsf = 2 Re(conj(u) du).
    std::vector<RealGrid> dpsf_shifted;
    for (int cp = 0; cp < c; ++cp) {
        auto f = psf_channel_fields(phase.channels[cp]);
        CplxGrid dt(n, n);
        for (size_t i = 0; i < dt.size(); ++i)
            dt.v[i] = cplx(0.0, 1.0) * f.t.v[i] * dphi[cp].v[i];
        fft::fft2d(dt, fft::Dir::inverse);
        RealGrid dpsf(n, n);
        for (size_t i = 0; i < dpsf.size(); ++i)
            dpsf.v[i] = 2.0 * (std::conj(f.u.v[i]) * dt.v[i]).real();
        dpsf_shifted.push_back(fft::fftshift(dpsf));
    }
    EffectivePsfSet deff;
    deff.n = n;
    deff.values.assign(c, RealGrid(n, n));
    for (int ci = 0; ci < c; ++ci)
        for (int cp = 0; cp < c; ++cp)
            for (size_t i = 0; i < deff.values[ci].size(); ++i)
                deff.values[ci].v[i] += a(cp, ci) * dpsf_shifted[cp].v[i];
    auto dout = forward_clean(precompute_psf_spectra(deff), scene_spectra(scene, n));

    double lhs = grid_dot(dout, g);
    auto grad = optical_backward(scene, phase, xt, g);
    double rhs = 0.0;
    for (int cp = 0; cp < c; ++cp) rhs += grid_dot(dphi[cp], grad[cp]);
    CHECK(std::abs(lhs - rhs) <= 1e-8 * std::max(std::abs(lhs), std::abs(rhs)));
}

TEST_CASE("optical backward: doubling the cross-talk matrix doubles the gradient") {
    const int n = 16, s = 8, c = 2;
    auto phase = random_phase(n, c, 32);
    auto scene = random_scene(s, c, 33);
    RealGrid g(n, n);
    std::mt19937_64 rng(34);
    oracle::fill_random(g, rng);

    Grid<double> a1(c, c), a2(c, c);
    for (int i = 0; i < c; ++i) {
        a1(i, i) = 1.0;
        a2(i, i) = 2.0;
    }
    auto g1 = optical_backward(scene, phase, matrix_xtalk(a1), g);
    auto g2 = optical_backward(scene, phase, matrix_xtalk(a2), g);
    for (int cp = 0; cp < c; ++cp)
        for (size_t i = 0; i < g1[cp].size(); ++i)
            CHECK(g2[cp].v[i] == 2.0 * g1[cp].v[i]);
}

TEST_CASE("cross-talk strictly degrades feature fidelity") {
    const int n = 128, s = 16;
    auto kernels = random_kernels(8, 3, 3, 35);
    auto target = build_target_psf(kernels, 8, n);
    auto scene = random_scene(s, 3, 36);
    auto un = unnormalized_target(target);

    std::vector<RealGrid> want;
    for (int j = 0; j < 8; ++j)
        want.push_back(oracle::conv_same_channels(scene.channels, kernels.w[j]));

    auto deviation = [&](double eps) {
        Grid<double> a(3, 3);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) a(i, j) = i == j ? 1.0 : eps;
        auto spectra = precompute_psf_spectra(mix_psfs(un, matrix_xtalk(a)));
        auto clean = forward_clean(spectra, scene_spectra(scene, n));
        auto features = extract_feature_map(clean, target.layout, s);
        return oracle::rel_l2_stack(features, want);
    };

    double d0 = deviation(0.0);
    double d1 = deviation(0.1);
    double d2 = deviation(0.2);
    CHECK(d0 < 1e-10);
    CHECK(d1 > d0);
    CHECK(d2 > d1);
}

TEST_CASE("optical layer: input validation") {
    auto phase = random_phase(16, 2, 37);
    auto scene = random_scene(8, 2, 38);

    CHECK_THROWS_AS(optical_forward(scene, phase, identity_xtalk(3), noise_off()),
                    InvalidInput);

    SceneImage bad = scene;
    bad.channels[0](0, 0) = -1.0;
    CHECK_THROWS_AS(optical_forward(bad, phase, identity_xtalk(2), noise_off()),
                    InvalidInput);

    SceneImage big = random_scene(32, 2, 39);
    CHECK_THROWS_AS(optical_forward(big, phase, identity_xtalk(2), noise_off()),
                    InvalidInput);

    RealGrid wrong(8, 8);
    CHECK_THROWS_AS(optical_backward(scene, phase, identity_xtalk(2), wrong),
                    InvalidInput);
}
