#include <doctest.h>

#include <cmath>

#include "wgnet/continuum.hpp"

using namespace wgnet;

TEST_CASE("discrete multiplier solves the three-term recurrence") {
    const double h = 1.0 / 16;
    for (double lambda : {5.0, 30.0, 200.0}) {
        const cplx rho = discrete_multiplier(lambda, 1.0, 10.0, h);
        CHECK(std::abs(rho + 1.0 / rho - (2.0 - h * h * (lambda - 10.0))) < 1e-12);
        if (lambda > 10.0 && lambda < 10.0 + 4.0 / (h * h)) {
            CHECK(std::abs(std::abs(rho) - 1.0) < 1e-14);
            CHECK(rho.imag() > 0.0);
        } else {
            CHECK(std::abs(rho) < 1.0);
        }
    }
}

TEST_CASE("discrete transverse modes are orthonormal with sine eigenvalues") {
    const double h = 0.1, w = 1.0;
    for (WallBC wall : {WallBC::Dirichlet, WallBC::Neumann}) {
        const ModeBasis b = discrete_transverse_modes(w, wall, 5, h);
        CHECK((h * b.samples.transpose() * b.samples - RMatrix::Identity(5, 5)).norm() < 1e-12);
        const int shift = wall == WallBC::Dirichlet ? 1 : 0;
        for (int n = 0; n < 5; ++n) {
            const double s = std::sin((n + shift) * kPi * h / (2 * w));
            CHECK(b.eigenvalues[n] == doctest::Approx(4 / (h * h) * s * s).epsilon(1e-12));
        }
    }
    const ModeBasis c = transverse_modes(2.0, WallBC::Dirichlet, 3);
    CHECK(c.eigenvalues[1] == doctest::Approx(kPi * kPi));
    CHECK(c.phi(0, 1.0) == doctest::Approx(1.0));
    const auto [l0, l1] = discrete_thresholds(1.0, WallBC::Dirichlet, 1.0 / 64);
    CHECK(l0 < kPi * kPi);
    CHECK(l0 == doctest::Approx(kPi * kPi).epsilon(1e-3));
    CHECK(l1 == doctest::Approx(4 * kPi * kPi).epsilon(1e-3));
}

TEST_CASE("straight channel: reflectionless with the discrete phase") {
    const double h = 1.0 / 16, a = 0.75;
    const double lambda = 2.0 * kPi * kPi;
    const JunctionResult r = junction_smatrix(straight_geometry(a), lambda, h);
    const cplx rho = discrete_multiplier(lambda, 1.0, r.lambda0_h, h);
    CHECK(std::abs(r.T(0, 0)) < 1e-12);
    CHECK(std::abs(r.T(1, 0) - std::pow(rho, a / h)) < 1e-12);
    CHECK(r.wavenumber == doctest::Approx(std::arg(rho) / h));
}

TEST_CASE("T-junction matrix is unitary, symmetric and mirror symmetric") {
    const JunctionResult r = junction_smatrix(tee_geometry(), 2.5 * kPi * kPi, 1.0 / 32);
    CHECK(r.unitarity < 1e-11);
    CHECK(r.symmetry < 1e-11);
    CHECK(std::abs(r.T(1, 0) - r.T(2, 0)) < 1e-10);
    CHECK(std::abs(r.T(1, 1) - r.T(2, 2)) < 1e-10);
    for (double e : r.evanescent) CHECK(e < 1e-2);
    CHECK_THROWS_AS(junction_smatrix(tee_geometry(), 0.5 * kPi * kPi, 1.0 / 32), UsageError);
    CHECK_THROWS_AS(junction_smatrix(tee_geometry(), 4.5 * kPi * kPi, 1.0 / 32), UsageError);
}

TEST_CASE("Neumann walls: threshold zero and unit transmission at every energy in a straight guide") {
    JunctionGeometry g = straight_geometry(0.5);
    g.wall = WallBC::Neumann;
    const JunctionResult r = junction_smatrix(g, 3.0, 1.0 / 16);
    CHECK(r.lambda0_h == 0.0);
    CHECK(std::abs(std::abs(r.T(1, 0)) - 1.0) < 1e-12);
}

TEST_CASE("scaling with the grid is exact") {
    const auto rep = scaling_invariance_check(bend_geometry(), 2.0 * kPi * kPi, 0.5, 1.0 / 16, true);
    CHECK(rep.deviation < 1e-11);
}

TEST_CASE("geometry files round trip and invalid layouts are rejected") {
    const JunctionGeometry g = tee_geometry(2.5);
    const JunctionGeometry r = geometry_from_json(geometry_to_json(g));
    REQUIRE(r.leads.size() == 3);
    CHECK(r.leads[1].axis == Axis::PlusY);
    CHECK(r.leads[1].mouth_y == 1.0);
    CHECK(r.leads[2].length == 2.5);
    CHECK(geometry_to_json(r) == geometry_to_json(g));

    CHECK_THROWS_AS(build_grid(tee_geometry(1.0), 1.0 / 8), InputError);  // lead shorter than two widths
    JunctionGeometry off = tee_geometry();
    off.leads[0].mouth_y = 0.5;
    CHECK_THROWS(build_grid(off, 1.0 / 8));
    CHECK_THROWS_AS(parse_wall("periodic"), UsageError);
}

TEST_CASE("bounded rectangle eigenvalues match the discrete closed form") {
    const double eps = 0.25, h = eps / 10;
    const Eigen2DResult r = network_eigenvalues_2d(straight_channel(eps, 1.0), h, 4);
    REQUIRE(r.values.size() >= 4);
    auto s2 = [&](double x) { return std::pow(std::sin(x), 2); };
    for (int m = 1; m <= 4; ++m) {
        const double exact = eps * eps * (4 / (h * h) * s2(kPi * h / (2 * eps)) + 4 / (h * h) * s2(m * kPi * h / 2));
        CHECK(r.values[m - 1].lambda == doctest::Approx(exact).epsilon(1e-11));
        CHECK(r.values[m - 1].residual < 1e-8);
    }
}

TEST_CASE("mode-0 profile of a straight guide is a pure plane wave") {
    JunctionOptions opt;
    opt.keep_fields = true;
    const double h = 1.0 / 16, lambda = 2.0 * kPi * kPi;
    const JunctionResult r = junction_smatrix(straight_geometry(0.5), lambda, h, opt);
    REQUIRE(r.fields.size() == 2);
    const ModalProfile p = mode0_profile(r.fields[0], 1);
    for (std::size_t m = 0; m < p.t.size(); ++m) {
        const cplx expected = r.T(1, 0) * std::exp(cplx(0, 1) * r.wavenumber * p.t[m]);
        CHECK(std::abs(p.c0[m] - expected) < 1e-12);
        CHECK(p.residual[m] < 1e-12);
    }
}
