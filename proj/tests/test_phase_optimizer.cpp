#include "mcf/phase_optimizer.hpp"

#include <cmath>
#include <random>

#include "doctest.h"
#include "mcf/errors.hpp"
#include "mcf/fft.hpp"
#include "mcf/fourier_optics.hpp"
#include "mcf/rng.hpp"
#include "oracles.hpp"

using namespace mcf;

namespace {

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

TargetPsf wrap_target(int n, std::vector<RealGrid> channels) {
    TargetPsf t;
    t.n = n;
    t.channels = std::move(channels);
    return t;
}

TargetPsf random_target(int n, int channels, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::vector<RealGrid> ch(channels, RealGrid(n, n));
    for (auto& g : ch) oracle::fill_random(g, rng, 0.0, 2.0);
    return wrap_target(n, std::move(ch));
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

// The deterministic starting point optimize_phase will use.
PhaseProfile seeded_start(int n, int channels, uint64_t seed) {
    PhaseProfile p;
    p.n = n;
    for (int c = 0; c < channels; ++c) {
        RealGrid g(n, n);
        for (std::size_t i = 0; i < g.size(); ++i)
            g.v[i] = rng::kTwoPi * rng::uniform(seed, rng::stream::kPhaseInit + c, i);
        p.channels.push_back(std::move(g));
    }
    return p;
}

}  // namespace

TEST_CASE("psf_loss: self-target reaches exactly zero") {
    auto phase = random_phase(16, 2, 41);
    auto psf = psf_from_phase(phase);
    auto target = wrap_target(16, psf.channels);
    CHECK(psf_loss(phase, target) == 0.0);
}

TEST_CASE("psf_loss: zero target equals the summed squared PSF") {
    auto phase = random_phase(8, 1, 42);
    auto target = wrap_target(8, {RealGrid(8, 8)});
    auto psf = psf_from_phase(phase);
    double want = 0.0;
    for (double v : psf.channels[0].v) want += v * v;
    CHECK(psf_loss(phase, target) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("psf_loss: matches brute-force evaluation on a 4x4 instance") {
    auto phase = random_phase(4, 2, 43);
    auto target = random_target(4, 2, 44);

    double want = 0.0;
    for (int c = 0; c < 2; ++c) {
        CplxGrid t(4, 4);
        for (int r = 0; r < 4; ++r)
            for (int q = 0; q < 4; ++q)
                t(r, q) = std::polar(1.0, phase.channels[c](r, q));
        auto u = oracle::dft2d(t, +1);
        RealGrid psf_corner(4, 4);
        for (std::size_t i = 0; i < u.size(); ++i) psf_corner.v[i] = std::norm(u.v[i]);
        // centre the PSF the same way the library reports it
        for (int r = 0; r < 4; ++r)
            for (int q = 0; q < 4; ++q) {
                double p = psf_corner((r + 2) % 4, (q + 2) % 4);
                double d = p - target.channels[c](r, q);
                want += d * d;
            }
    }
    CHECK(psf_loss(phase, target) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("psf_loss_gradient: zero at the global minimum") {
    auto phase = random_phase(8, 2, 45);
    auto target = wrap_target(8, psf_from_phase(phase).channels);
    auto g = psf_loss_gradient(phase, target);
    for (const auto& ch : g)
        for (double v : ch.v) CHECK(v == 0.0);
}

TEST_CASE("psf_loss_gradient: 2*pi phase periodicity") {
    auto phase = random_phase(8, 1, 46);
    auto target = random_target(8, 1, 47);
    auto g1 = psf_loss_gradient(phase, target);
    auto shifted = phase;
    for (auto& v : shifted.channels[0].v) v += rng::kTwoPi;
    auto g2 = psf_loss_gradient(shifted, target);
    double gmax = 0.0;
    for (double v : g1[0].v) gmax = std::max(gmax, std::abs(v));
    for (std::size_t i = 0; i < g1[0].size(); ++i)
        CHECK(std::abs(g1[0].v[i] - g2[0].v[i]) <= 1e-12 * gmax);
}

TEST_CASE("psf_loss_gradient: matches central finite differences") {
    auto phase = random_phase(8, 1, 48);
    auto target = random_target(8, 1, 49);
    auto grad = psf_loss_gradient(phase, target);

    double gmax = 0.0;
    for (double v : grad[0].v) gmax = std::max(gmax, std::abs(v));
    REQUIRE(gmax > 0.0);

    const double h = 1e-6;
    for (int i = 0; i < 64; ++i) {
        auto p = phase;
        p.channels[0].v[i] += h;
        double up = psf_loss(p, target);
        p.channels[0].v[i] -= 2 * h;
        double dn = psf_loss(p, target);
        double fd = (up - dn) / (2 * h);
        CHECK(std::abs(fd - grad[0].v[i]) <= 1e-5 * gmax);
    }
}

TEST_CASE("optimize_phase: achievable target converges far below the start") {
    auto star = random_phase(16, 1, 50);
    auto target = wrap_target(16, psf_from_phase(star).channels);
    OptimizerConfig cfg;
    cfg.iterations = 2000;
    cfg.seed = 7;
    auto [phase, trace] = optimize_phase(target, cfg);
    CHECK(trace.final_loss < 1e-3 * trace.initial_loss);
    CHECK(psf_loss(phase, target) == doctest::Approx(trace.final_loss).epsilon(1e-9));
}

TEST_CASE("optimize_phase: tiled target loss drops steeply") {
    // Small-plane smoke check; the binary under tests/acceptance runs the
    // full-size layout where the drop exceeds two orders of magnitude.
    auto kernels = random_kernels(4, 3, 2, 51);
    auto target = build_target_psf(kernels, 4, 64);
    OptimizerConfig cfg;
    cfg.iterations = 800;
    cfg.seed = 3;
    auto [phase, trace] = optimize_phase(target, cfg);
    CHECK(trace.final_loss * 50.0 <= trace.initial_loss);
}

TEST_CASE("optimize_phase: single tiny fixed step does not increase the loss") {
    auto target = random_target(16, 1, 52);
    OptimizerConfig cfg;
    cfg.iterations = 1;
    cfg.step_rule = StepRule::fixed;
    cfg.learning_rate = 1e-7;
    cfg.seed = 9;
    auto [phase, trace] = optimize_phase(target, cfg);
    REQUIRE(trace.losses.size() == 2);
    CHECK(trace.losses[1] <= trace.losses[0]);
}

TEST_CASE("optimize_phase: deterministic given seed and config") {
    auto kernels = random_kernels(2, 3, 1, 53);
    auto target = build_target_psf(kernels, 2, 32);
    OptimizerConfig cfg;
    cfg.iterations = 40;
    cfg.seed = 11;
    auto [p1, t1] = optimize_phase(target, cfg);
    auto [p2, t2] = optimize_phase(target, cfg);
    REQUIRE(t1.losses.size() == t2.losses.size());
    for (std::size_t i = 0; i < t1.losses.size(); ++i) CHECK(t1.losses[i] == t2.losses[i]);
    for (std::size_t c = 0; c < p1.channels.size(); ++c)
        for (std::size_t i = 0; i < p1.channels[c].size(); ++i)
            CHECK(p1.channels[c].v[i] == p2.channels[c].v[i]);
}

TEST_CASE("optimize_phase: best-so-far never exceeds any visited loss") {
    auto target = random_target(16, 1, 54);
    OptimizerConfig cfg;
    cfg.iterations = 120;
    cfg.seed = 13;
    auto [phase, trace] = optimize_phase(target, cfg);
    double lo = trace.losses[0];
    for (double l : trace.losses) lo = std::min(lo, l);
    CHECK(trace.final_loss <= lo + 1e-12 * lo);
}

TEST_CASE("optimize_phase: shifted target reaches the same loss level") {
    const int n = 128;
    auto kernels = random_kernels(8, 3, 1, 62);
    auto target = build_target_psf(kernels, 8, n);

    // A spatial shift of the target corresponds to a linear phase ramp,
    // so both problems share one loss landscape.
    TargetPsf shifted = target;
    const int dr = 5, dc = 3;
    RealGrid moved(n, n);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c)
            moved((r + dr) % n, (c + dc) % n) = target.channels[0](r, c);
    shifted.channels[0] = moved;

    OptimizerConfig cfg;
    cfg.iterations = 2000;
    cfg.seed = 4;
    auto [pa, ta] = optimize_phase(target, cfg);
    auto [pb, tb] = optimize_phase(shifted, cfg);
    double hi = std::max(ta.final_loss, tb.final_loss);
    CHECK(std::abs(ta.final_loss - tb.final_loss) <= 0.01 * hi);
}

TEST_CASE("optimize_phase: divergence raises an error carrying the trace") {
    const int n = 16;
    auto start = seeded_start(n, 1, 21);
    auto psf = psf_from_phase(start);
    psf.channels[0](3, 3) += 1e-3;  // nearly-zero initial loss, nonzero gradient
    auto target = wrap_target(n, psf.channels);

    OptimizerConfig cfg;
    cfg.iterations = 400;
    cfg.step_rule = StepRule::fixed;
    cfg.learning_rate = 50.0;
    cfg.seed = 21;
    try {
        optimize_phase(target, cfg);
        FAIL("expected DivergenceError");
    } catch (const DivergenceError& e) {
        CHECK(e.trace.losses.size() >= 50);
        CHECK(e.trace.losses.back() > 10.0 * e.trace.losses.front());
    }
}

TEST_CASE("optimize_phase: checkpoint callback cadence") {
    auto target = random_target(16, 2, 56);
    OptimizerConfig cfg;
    cfg.iterations = 25;
    cfg.log_every = 10;
    cfg.seed = 15;
    std::vector<std::pair<int, double>> seen;
    auto [phase, trace] =
        optimize_phase(target, cfg, [&](int it, const PhaseProfile& p, double loss) {
            seen.emplace_back(it, loss);
            CHECK(p.n == 16);
            CHECK(p.channels.size() == 2);
        });
    REQUIRE(seen.size() == 2);
    CHECK(seen[0].first == 10);
    CHECK(seen[1].first == 20);
    CHECK(seen[0].second == trace.losses[9]);
    CHECK(seen[1].second == trace.losses[19]);
}

TEST_CASE("optimizer config validation") {
    OptimizerConfig cfg;
    cfg.iterations = 0;
    CHECK_THROWS_AS(cfg.validate(), InvalidInput);
    cfg.iterations = 10;
    cfg.learning_rate = 0.0;
    CHECK_THROWS_AS(cfg.validate(), InvalidInput);
    cfg.learning_rate = 0.1;
    cfg.log_every = -1;
    CHECK_THROWS_AS(cfg.validate(), InvalidInput);

    auto phase = random_phase(8, 1, 57);
    auto target = random_target(16, 1, 58);
    CHECK_THROWS_AS(psf_loss(phase, target), InvalidInput);
}
