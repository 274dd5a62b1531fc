#include "mcf/spectral.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "mcf/errors.hpp"

using namespace mcf;

namespace {

SpectralCurve make_curve(CurveKind kind, std::vector<double> f, std::vector<double> v) {
    SpectralCurve c;
    c.kind = kind;
    c.freq = std::move(f);
    c.value = std::move(v);
    c.validate();
    return c;
}

SpectralCurve box(CurveKind kind, double lo, double hi, double height) {
    return make_curve(kind, {lo, hi}, {height, height});
}

SpectralCurve as_kind(SpectralCurve c, CurveKind kind) {
    c.kind = kind;
    return c;
}

}  // namespace

TEST_CASE("curve parsing") {
    SUBCASE("three-sample curve") {
        auto c = parse_curve("450,0.0\n500,0.8\n550,0.1", CurveKind::pce, "inline");
        REQUIRE(c.freq.size() == 3);
        CHECK(c.freq[1] == 500.0);
        CHECK(c.value[1] == 0.8);
        CHECK(c.sample(500.0) == 0.8);
    }
    SUBCASE("header, comments and blank lines are skipped") {
        auto c = parse_curve("# source: bench A\nfrequency_THz,value\n\n400,0.5\n500,0.25\n",
                             CurveKind::ssf, "inline");
        REQUIRE(c.freq.size() == 2);
        CHECK(c.value[0] == 0.5);
    }
    SUBCASE("empty input fails") {
        CHECK_THROWS_AS(parse_curve("", CurveKind::pce, "inline"), ParseError);
        CHECK_THROWS_AS(parse_curve("# only a comment\n", CurveKind::pce, "inline"), ParseError);
    }
    SUBCASE("malformed row reports its line number") {
        try {
            parse_curve("400,0.1\n500;0.2\n600,0.3", CurveKind::pce, "bad.csv");
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.line() == 2);
            CHECK(e.file() == "bad.csv");
        }
    }
    SUBCASE("out-of-range value by kind") {
        CHECK_THROWS_AS(parse_curve("400,0.5\n500,1.3", CurveKind::pce, "inline"), ParseError);
        CHECK_THROWS_AS(parse_curve("400,0.5\n500,1.3", CurveKind::ssf, "inline"), ParseError);
        CHECK_NOTHROW(parse_curve("400,0.5\n500,1.3", CurveKind::spd, "inline"));
        CHECK_THROWS_AS(parse_curve("400,-0.1\n500,0.2", CurveKind::spd, "inline"), ParseError);
    }
    SUBCASE("non-ascending frequencies fail with line number") {
        try {
            parse_curve("500,0.1\n450,0.2", CurveKind::pce, "inline");
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.line() == 2);
        }
        CHECK_THROWS_AS(parse_curve("450,0.1\n450,0.2", CurveKind::pce, "inline"), ParseError);
    }
    SUBCASE("load_curve round trip and missing file") {
        auto path = std::filesystem::temp_directory_path() / "mcf_test_curve.csv";
        {
            std::ofstream out(path);
            out << "# comment\n400,0.25\n500,0.75\n";
        }
        auto c = load_curve(path.string(), CurveKind::pce);
        CHECK(c.freq.size() == 2);
        CHECK(c.sample(450.0) == doctest::Approx(0.5).epsilon(1e-12));
        std::filesystem::remove(path);
        CHECK_THROWS_AS(load_curve("/nonexistent/no_such_curve.csv", CurveKind::pce),
                        InvalidInput);
    }
}

TEST_CASE("curve sampling semantics") {
    auto c = make_curve(CurveKind::pce, {400, 450, 500}, {0.0, 1.0, 0.5});
    CHECK(c.sample(399.999) == 0.0);
    CHECK(c.sample(500.001) == 0.0);
    CHECK(c.sample(400.0) == 0.0);
    CHECK(c.sample(450.0) == 1.0);
    CHECK(c.sample(500.0) == 0.5);
    CHECK(c.sample(425.0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(c.sample(475.0) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("cross-talk matrix: disjoint unit boxes give a diagonal matrix") {
    const double width = 20.0;
    std::vector<SpectralCurve> pce = {box(CurveKind::pce, 400, 420, 1.0),
                                      box(CurveKind::pce, 440, 460, 1.0),
                                      box(CurveKind::pce, 480, 500, 1.0)};
    std::vector<SpectralCurve> spd = {box(CurveKind::spd, 400, 420, 1.0),
                                      box(CurveKind::spd, 440, 460, 1.0),
                                      box(CurveKind::spd, 480, 500, 1.0)};
    auto ssf = box(CurveKind::ssf, 380, 520, 1.0);

    IntegrationGrid grid;
    grid.points = 1401;  // 0.1 THz steps over [380, 520]: box edges fall on nodes
    grid.lo = 380.0;
    grid.hi = 520.0;
    auto a = crosstalk_matrix(pce, spd, ssf, grid);
    CHECK_FALSE(a.degenerate);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            if (i == j)
                CHECK(a.entries(i, j) == doctest::Approx(width).epsilon(1e-2));
            else
                CHECK(a.entries(i, j) == 0.0);
        }
}

TEST_CASE("cross-talk matrix: constant curves integrate to the interval length") {
    auto one = [](CurveKind k) { return box(k, 400, 500, 1.0); };
    std::vector<SpectralCurve> pce = {one(CurveKind::pce), one(CurveKind::pce)};
    std::vector<SpectralCurve> spd = {one(CurveKind::spd), one(CurveKind::spd)};
    auto a = crosstalk_matrix(pce, spd, one(CurveKind::ssf));
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            CHECK(a.entries(i, j) == doctest::Approx(100.0).epsilon(1e-12));
}

TEST_CASE("cross-talk matrix: triangle times rectangle matches a hand computation") {
    // Triangle rising 400->450, falling 450->500; rectangle 0.8 on [420, 480];
    // flat unit sensor response. On a 0.1 THz grid the integrand is linear
    // inside every cell except the two cells straddling the rectangle's edge
    // discontinuities, so the quadrature value can be written down by hand:
    // interior 33.6 plus 0.016 for each edge cell.
    std::vector<SpectralCurve> pce = {
        make_curve(CurveKind::pce, {400, 450, 500}, {0.0, 1.0, 0.0})};
    std::vector<SpectralCurve> spd = {box(CurveKind::spd, 420, 480, 0.8)};
    auto ssf = box(CurveKind::ssf, 400, 500, 1.0);

    IntegrationGrid grid;
    grid.points = 1001;
    grid.lo = 400.0;
    grid.hi = 500.0;
    auto a = crosstalk_matrix(pce, spd, ssf, grid);
    CHECK(std::abs(a.entries(0, 0) - 33.632) <= 1e-6);
}

TEST_CASE("cross-talk matrix: disjoint supports yield zero matrix and warning") {
    std::vector<SpectralCurve> pce = {box(CurveKind::pce, 400, 420, 1.0)};
    std::vector<SpectralCurve> spd = {box(CurveKind::spd, 600, 620, 1.0)};
    auto ssf = box(CurveKind::ssf, 800, 820, 1.0);
    auto a = crosstalk_matrix(pce, spd, ssf);
    CHECK(a.degenerate);
    CHECK(a.entries(0, 0) == 0.0);

    // Partial overlap is not degenerate even if some entries vanish.
    std::vector<SpectralCurve> pce2 = {box(CurveKind::pce, 400, 420, 1.0),
                                       box(CurveKind::pce, 430, 450, 1.0)};
    std::vector<SpectralCurve> spd2 = {box(CurveKind::spd, 400, 420, 1.0),
                                       box(CurveKind::spd, 430, 450, 1.0)};
    auto ssf2 = box(CurveKind::ssf, 380, 460, 1.0);
    auto a2 = crosstalk_matrix(pce2, spd2, ssf2);
    CHECK_FALSE(a2.degenerate);
    CHECK(a2.entries(0, 1) == 0.0);
    CHECK(a2.entries(0, 0) > 0.0);
}

TEST_CASE("cross-talk matrix: bilinearity in the illuminants") {
    std::vector<SpectralCurve> pce = {
        make_curve(CurveKind::pce, {400, 450, 500}, {0.1, 0.9, 0.2}),
        make_curve(CurveKind::pce, {420, 470, 520}, {0.0, 0.7, 0.1})};
    std::vector<SpectralCurve> spd = {
        make_curve(CurveKind::spd, {410, 460, 510}, {0.5, 2.0, 0.5}),
        make_curve(CurveKind::spd, {430, 480, 530}, {0.25, 1.5, 0.0})};
    auto ssf = make_curve(CurveKind::ssf, {380, 460, 540}, {0.2, 1.0, 0.3});

    auto a1 = crosstalk_matrix(pce, spd, ssf);
    const double s = 3.7;
    auto spd_scaled = spd;
    for (auto& v : spd_scaled[1].value) v *= s;
    auto a2 = crosstalk_matrix(pce, spd_scaled, ssf);
    for (int cp = 0; cp < 2; ++cp) {
        CHECK(a2.entries(cp, 0) == a1.entries(cp, 0));
        CHECK(a2.entries(cp, 1) ==
              doctest::Approx(s * a1.entries(cp, 1)).epsilon(1e-14));
    }
}

TEST_CASE("cross-talk matrix: permutation symmetry") {
    std::vector<SpectralCurve> pce = {
        make_curve(CurveKind::pce, {400, 450, 500}, {0.1, 0.9, 0.2}),
        make_curve(CurveKind::pce, {420, 470, 520}, {0.0, 0.7, 0.1}),
        make_curve(CurveKind::pce, {440, 490, 540}, {0.2, 0.8, 0.0})};
    std::vector<SpectralCurve> spd = {
        make_curve(CurveKind::spd, {410, 460, 510}, {0.5, 2.0, 0.5}),
        make_curve(CurveKind::spd, {430, 480, 530}, {0.25, 1.5, 0.0}),
        make_curve(CurveKind::spd, {450, 500, 550}, {0.4, 1.2, 0.3})};
    auto ssf = make_curve(CurveKind::ssf, {380, 470, 560}, {0.2, 1.0, 0.3});

    auto a = crosstalk_matrix(pce, spd, ssf);
    const int perm[3] = {2, 0, 1};
    std::vector<SpectralCurve> pce_p(3), spd_p(3);
    for (int i = 0; i < 3; ++i) {
        pce_p[static_cast<size_t>(perm[i])] = pce[static_cast<size_t>(i)];
        spd_p[static_cast<size_t>(perm[i])] = spd[static_cast<size_t>(i)];
    }
    auto ap = crosstalk_matrix(pce_p, spd_p, ssf);
    for (int cp = 0; cp < 3; ++cp)
        for (int c = 0; c < 3; ++c)
            CHECK(ap.entries(perm[cp], perm[c]) == a.entries(cp, c));
}

TEST_CASE("cross-talk matrix: grid refinement is converged") {
    std::vector<SpectralCurve> pce = {
        make_curve(CurveKind::pce, {400, 450, 500}, {0.0, 1.0, 0.0})};
    std::vector<SpectralCurve> spd = {
        make_curve(CurveKind::spd, {420, 430, 470, 480}, {0.0, 0.8, 0.8, 0.0})};
    auto ssf = make_curve(CurveKind::ssf, {400, 450, 500}, {0.3, 1.0, 0.3});

    IntegrationGrid coarse, fine;
    coarse.points = 1024;
    fine.points = 2048;
    auto a1 = crosstalk_matrix(pce, spd, ssf, coarse);
    auto a2 = crosstalk_matrix(pce, spd, ssf, fine);
    double rel = std::abs(a1.entries(0, 0) - a2.entries(0, 0)) / a2.entries(0, 0);
    CHECK(rel < 1e-6);
}

TEST_CASE("synthetic passband") {
    SUBCASE("peaks at the requested center") {
        auto c = synth_pce(600.0, 50.0, 0.9);
        c.validate();
        double best = -1.0, best_f = 0.0;
        for (size_t i = 0; i < c.freq.size(); ++i)
            if (c.value[i] > best) {
                best = c.value[i];
                best_f = c.freq[i];
            }
        CHECK(best == doctest::Approx(0.9).epsilon(1e-12));
        CHECK(best_f == 600.0);
        CHECK(c.sample(600.0 + 25.0) == doctest::Approx(0.45).epsilon(1e-2));
    }
    SUBCASE("negligible tails beyond five widths") {
        auto c = synth_pce(600.0, 10.0, 1.0);
        for (size_t i = 0; i < c.freq.size(); ++i)
            if (std::abs(c.freq[i] - 600.0) > 50.0) CHECK(c.value[i] < 1e-6);
        CHECK(c.sample(600.0 + 55.0) < 1e-6);
    }
    SUBCASE("well-separated bumps leave negligible cross-talk") {
        std::vector<SpectralCurve> pce = {synth_pce(500.0, 20.0, 0.9),
                                          synth_pce(700.0, 20.0, 0.9)};
        std::vector<SpectralCurve> spd = {as_kind(synth_pce(500.0, 20.0, 1.0), CurveKind::spd),
                                          as_kind(synth_pce(700.0, 20.0, 1.0), CurveKind::spd)};
        auto ssf = box(CurveKind::ssf, 350, 850, 1.0);
        auto a = crosstalk_matrix(pce, spd, ssf);
        double dmin = std::min(a.entries(0, 0), a.entries(1, 1));
        CHECK(dmin > 0.0);
        CHECK(a.entries(0, 1) < 1e-8 * dmin);
        CHECK(a.entries(1, 0) < 1e-8 * dmin);
    }
    SUBCASE("invalid parameters") {
        CHECK_THROWS_AS(synth_pce(600.0, 0.0, 0.9), InvalidInput);
        CHECK_THROWS_AS(synth_pce(600.0, 50.0, 0.0), InvalidInput);
        CHECK_THROWS_AS(synth_pce(600.0, 50.0, 1.2), InvalidInput);
    }
}

TEST_CASE("cross-talk matrix: input validation") {
    std::vector<SpectralCurve> pce = {box(CurveKind::pce, 400, 500, 1.0)};
    std::vector<SpectralCurve> spd = {box(CurveKind::spd, 400, 500, 1.0),
                                      box(CurveKind::spd, 400, 500, 1.0)};
    auto ssf = box(CurveKind::ssf, 400, 500, 1.0);
    CHECK_THROWS_AS(crosstalk_matrix(pce, spd, ssf), InvalidInput);
    IntegrationGrid bad;
    bad.points = 1;
    CHECK_THROWS_AS(crosstalk_matrix(pce, {spd[0]}, ssf, bad), InvalidInput);
}
