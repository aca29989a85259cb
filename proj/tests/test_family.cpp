#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "test_families.hpp"
#include "zlab/family.hpp"

using zlab::AlgebraVector;
using zlab::cdouble;
using zlab::ComplexMatrix;
using zlab::GroupElement;
using zlab::HoloFamily;
using zlab::Region;
using Catch::Approx;

namespace {

GroupElement additive_point(cdouble z) {
    return zlab::additive_group(1).make_element(ComplexMatrix(1, 1, {z}));
}

GroupElement torus_point(cdouble w) {
    return zlab::torus_group(1).make_element(ComplexMatrix(1, 1, {w}));
}

HoloFamily constant_family(const zlab::GroupInstance& g) {
    HoloFamily fam;
    fam.source = &g;
    fam.target_dim = 1;
    fam.description = "constant";
    fam.eval = [](int, const GroupElement&) {
        return zlab::ProjectivePoint({cdouble(1.0), cdouble(0.25, 0.5)});
    };
    fam.in_domain = [](const GroupElement&) { return true; };
    return fam;
}

// closed-form spherical derivative of z^j, the direct-evaluation oracle
double power_sph(cdouble z, int j) {
    double zj = 1.0, zjm1 = 1.0;
    for (int k = 0; k < j; ++k) zj *= std::abs(z);
    for (int k = 0; k + 1 < j; ++k) zjm1 *= std::abs(z);
    return double(j) * zjm1 / (1.0 + zj * zj);
}

} // namespace

TEST_CASE("df_norm of the linear family is the spherical derivative") {
    const HoloFamily fam = make_builtin_family("linear-family", zlab::additive_group(1));
    CHECK(zlab::df_norm(fam, 5, additive_point(0.0)).value == Approx(5.0).margin(1e-12));
    CHECK(zlab::df_norm(fam, 12, additive_point(0.0)).value == Approx(12.0).margin(1e-12));
    // away from the origin: j/(1+|jz|^2)
    const cdouble z(0.2, -0.1);
    const double expected = 7.0 / (1.0 + std::norm(7.0 * z));
    CHECK(zlab::df_norm(fam, 7, additive_point(z)).value == Approx(expected).epsilon(1e-12));
}

TEST_CASE("df_norm of a constant family vanishes") {
    const HoloFamily fam = constant_family(zlab::additive_group(1));
    CHECK(zlab::df_norm(fam, 3, additive_point(cdouble(0.3, 0.4))).value == 0.0);
}

TEST_CASE("df_norm outside the domain is a domain error") {
    const HoloFamily fam = make_builtin_family("power-family", zlab::additive_group(1));
    CHECK_THROWS_AS(zlab::df_norm(fam, 2, additive_point(cdouble(1.5, 0.0))),
                    zlab::domain_violation);
}

TEST_CASE("torus identity map has the expected differential norm on the circle") {
    const HoloFamily fam = make_builtin_family("torus-power-family", zlab::torus_group(1));
    const GroupElement g = torus_point(std::exp(cdouble(0.0, 0.7)));
    // f(w) = w at |w| = 1: |f'| * |w| / (1 + |w|^2) = 1/2
    CHECK(zlab::df_norm(fam, 1, g).value == Approx(0.5).epsilon(1e-12));

    // the two differentiation paths agree
    const ComplexMatrix analytic = zlab::frame_matrix(fam, 1, g);
    const ComplexMatrix numeric = zlab::numeric_frame_matrix(fam, 1, g);
    CHECK((analytic - numeric).max_abs() < 1e-6);
}

TEST_CASE("analytic and numeric paths agree for every built-in family") {
    struct Case {
        const char* family;
        const zlab::GroupInstance* group;
        GroupElement center;
        double radius;
    };
    const Case cases[] = {
        {"linear-family", &zlab::additive_group(1), additive_point(0.1), 0.5},
        {"power-family", &zlab::additive_group(1), additive_point(0.0), 0.6},
        {"exp-family", &zlab::additive_group(1), additive_point(0.0), 0.8},
        {"torus-power-family", &zlab::torus_group(1), torus_point(1.0), 0.05},
        {"sl2-entry-family", &zlab::sl2_group(), zlab::sl2_group().identity(), 0.4},
    };
    for (const Case& c : cases) {
        const HoloFamily fam = make_builtin_family(c.family, *c.group);
        INFO(c.family);
        CHECK_NOTHROW(
            zlab::spot_check_differential(fam, Region{c.center, c.radius, 11}, 20, 1e-6, 7, 3));
    }
}

TEST_CASE("spot check catches a wrong analytic differential") {
    HoloFamily fam = make_builtin_family("linear-family", zlab::additive_group(1));
    fam.frame_differential = [](int j, const GroupElement& g) {
        ComplexMatrix m = zlab::numeric_frame_matrix(
            make_builtin_family("linear-family", zlab::additive_group(1)), j, g);
        return m.scaled(1.5); // deliberately off
    };
    CHECK_THROWS_AS(
        zlab::spot_check_differential(fam, Region{additive_point(0.0), 0.5, 11}, 5, 1e-6, 7, 2),
        zlab::internal_error);
}

TEST_CASE("region validation rejects regions leaving the domain") {
    const HoloFamily fam = make_builtin_family("power-family", zlab::additive_group(1));
    CHECK_NOTHROW(zlab::validate_region(fam, Region{additive_point(0.0), 0.9, 11}));
    CHECK_THROWS_AS(zlab::validate_region(fam, Region{additive_point(0.0), 1.2, 11}),
                    zlab::domain_violation);
    CHECK_THROWS_AS(zlab::validate_region(fam, Region{additive_point(cdouble(0.5, 0.0)), 0.7, 11}),
                    zlab::domain_violation);
}

TEST_CASE("ball lattice basics") {
    const auto nodes = zlab::detail::ball_lattice(1, 0.9, 41);
    CHECK(nodes.size() > 1200); // about pi/4 of 41^2
    CHECK(nodes.size() < 1681);
    bool has_center = false;
    for (const AlgebraVector& v : nodes) {
        CHECK(v.norm() <= 0.9 * (1.0 + 1e-9));
        if (v.norm() == 0.0) has_center = true;
    }
    CHECK(has_center);

    CHECK_THROWS_AS(zlab::detail::ball_lattice(8, 1.0, 9), zlab::scan_failure); // 9^16 nodes
}

TEST_CASE("marty scan classifies the power family as normal") {
    const HoloFamily fam = make_builtin_family("power-family", zlab::additive_group(1));
    Region region{additive_point(0.0), 0.9, 41};
    std::vector<int> indices;
    for (int j = 1; j <= 30; ++j) indices.push_back(j);
    zlab::MartyOptions opts;
    opts.cap = 10.0;
    const zlab::NormalityReport rep = zlab::marty_scan(fam, region, indices, opts);
    CHECK(rep.verdict == "normal");
    CHECK(rep.bounded);

    // oracle: direct evaluation of the closed-form spherical derivative on
    // the same lattice
    const auto nodes = zlab::detail::ball_lattice(1, 0.9, 41);
    for (const zlab::IndexMax& im : rep.maxima) {
        double direct = 0.0;
        for (const AlgebraVector& v : nodes) direct = std::max(direct, power_sph(v[0], im.index));
        CHECK(im.max_norm == Approx(direct).epsilon(1e-9));
    }
    // the maxima are eventually decreasing on this disk
    CHECK(rep.maxima.back().max_norm < rep.maxima[9].max_norm);
}

TEST_CASE("marty scan flags the linear family as non-normal") {
    const HoloFamily fam = make_builtin_family("linear-family", zlab::additive_group(1));
    Region region{additive_point(0.0), 1.0, 41};
    std::vector<int> indices;
    for (int j = 1; j <= 15; ++j) indices.push_back(j);
    zlab::MartyOptions opts;
    opts.cap = 10.0;
    const zlab::NormalityReport rep = zlab::marty_scan(fam, region, indices, opts);
    CHECK(rep.verdict == "non-normal");
    CHECK_FALSE(rep.bounded);
    CHECK(rep.growth_exponent == Approx(1.0).margin(0.05));
    for (const zlab::IndexMax& im : rep.maxima) {
        CHECK(im.max_norm == Approx(double(im.index)).epsilon(1e-12)); // argmax at 0
        for (cdouble z : im.argmax_offset) CHECK(std::abs(z) == 0.0);
    }
}

TEST_CASE("marty verdicts are stable under grid refinement") {
    const HoloFamily powers = make_builtin_family("power-family", zlab::additive_group(1));
    const HoloFamily linear = make_builtin_family("linear-family", zlab::additive_group(1));
    std::vector<int> indices;
    for (int j = 1; j <= 12; ++j) indices.push_back(j);
    zlab::MartyOptions opts;
    opts.cap = 8.0;
    const auto pv1 = zlab::marty_scan(powers, Region{additive_point(0.0), 0.9, 21}, indices, opts);
    const auto pv2 = zlab::marty_scan(powers, Region{additive_point(0.0), 0.9, 41}, indices, opts);
    CHECK(pv1.verdict == pv2.verdict);
    const auto lv1 = zlab::marty_scan(linear, Region{additive_point(0.0), 1.0, 21}, indices, opts);
    const auto lv2 = zlab::marty_scan(linear, Region{additive_point(0.0), 1.0, 41}, indices, opts);
    CHECK(lv1.verdict == lv2.verdict);
}

TEST_CASE("constant families scan as normal with zero maxima") {
    const HoloFamily fam = constant_family(zlab::additive_group(1));
    const zlab::NormalityReport rep =
        zlab::marty_scan(fam, Region{additive_point(0.0), 0.5, 21}, {1, 2, 3, 4, 5});
    CHECK(rep.verdict == "normal");
    for (const zlab::IndexMax& im : rep.maxima) CHECK(im.max_norm == 0.0);
}

TEST_CASE("failed grid nodes are counted and capped at one percent") {
    HoloFamily base = make_builtin_family("linear-family", zlab::additive_group(1));
    const Region region{additive_point(0.0), 1.0, 41};

    // a single lattice node fails: tolerated and recorded
    HoloFamily rare = base;
    rare.eval = [inner = base.eval](int j, const GroupElement& g) {
        if (std::abs(g.value()(0, 0) - cdouble(1.0, 0.0)) < 1e-12)
            throw zlab::domain_violation("synthetic node failure");
        return inner(j, g);
    };
    rare.frame_differential = nullptr; // force the eval path everywhere
    const zlab::NormalityReport rep = zlab::marty_scan(rare, region, {2, 3});
    CHECK(rep.maxima[0].failed_nodes == 1);

    // a quarter of the disk fails: scan error
    HoloFamily broken = base;
    broken.eval = [inner = base.eval](int j, const GroupElement& g) {
        if (g.value()(0, 0).real() > 0.5) throw zlab::domain_violation("synthetic node failure");
        return inner(j, g);
    };
    broken.frame_differential = nullptr;
    CHECK_THROWS_AS(zlab::marty_scan(broken, region, {2, 3}), zlab::scan_failure);
}

TEST_CASE("marty scan rejects an empty index list") {
    const HoloFamily fam = make_builtin_family("linear-family", zlab::additive_group(1));
    CHECK_THROWS_AS(zlab::marty_scan(fam, Region{additive_point(0.0), 1.0, 21}, {}),
                    zlab::invalid_input);
}

TEST_CASE("exp-family scans as non-normal on a centered disk") {
    const HoloFamily fam = make_builtin_family("exp-family", zlab::additive_group(1));
    std::vector<int> indices;
    for (int j = 4; j <= 40; j += 4) indices.push_back(j);
    zlab::MartyOptions opts;
    opts.cap = 5.0;
    const zlab::NormalityReport rep =
        zlab::marty_scan(fam, Region{additive_point(0.0), 0.5, 21}, indices, opts);
    CHECK(rep.verdict == "non-normal");
    // max of j / (2 cosh(j x)) over the disk sits on the imaginary axis
    for (const zlab::IndexMax& im : rep.maxima)
        CHECK(im.max_norm == Approx(double(im.index) / 2.0).epsilon(1e-9));
}

TEST_CASE("deterministic scans are invariant under the thread count") {
    // synthetic objective with a tie: both threaded and serial scans must
    // report the first (lexicographically smallest) index
    auto eval = [](std::size_t i) {
        if (i % 977 == 3) throw zlab::domain_violation("synthetic failure");
        const double v = std::sin(double(i % 4096) * 0.37);
        return v;
    };
    const std::size_t n = 300000;
    const auto serial = zlab::detail::deterministic_max_scan(n, eval, 1);
    const auto twothr = zlab::detail::deterministic_max_scan(n, eval, 2);
    const auto manythr = zlab::detail::deterministic_max_scan(n, eval, 16);
    CHECK(serial.best == twothr.best);
    CHECK(serial.best_index == twothr.best_index);
    CHECK(serial.failed == twothr.failed);
    CHECK(serial.best == manythr.best);
    CHECK(serial.best_index == manythr.best_index);
    CHECK(serial.failed == manythr.failed);
    CHECK(serial.evaluated == manythr.evaluated);
}
