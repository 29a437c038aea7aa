#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "test_support.hpp"
#include "wgnet/spectral.hpp"

using namespace wgnet;
using testing::kL0;

TEST_CASE("single edge spectra for Dirichlet and Neumann ends") {
    const double eps = 0.1;
    const auto dd = find_eigenvalues(testing::single_edge(1.0), eps, kL0, kL0 + eps * eps * kPi * kPi * 5.5 * 5.5);
    REQUIRE(dd.values.size() == 5);
    for (int m = 1; m <= 5; ++m) {
        const double exact = kL0 + eps * eps * kPi * kPi * m * m;
        CHECK(std::abs(dd.values[m - 1].lambda - exact) < 1e-10 * exact);
        CHECK(dd.values[m - 1].multiplicity == 1);
    }
    const auto nn = find_eigenvalues(testing::single_edge(2.0, FreeEndBC::neumann(), FreeEndBC::neumann()), eps,
                                     kL0, kL0 + 0.45);
    REQUIRE(nn.values.size() == 4);
    CHECK(nn.values[0].lambda == doctest::Approx(kL0 + eps * eps * kPi * kPi / 4).epsilon(1e-12));
}

TEST_CASE("Kirchhoff star with equal edges: multiplicities from the decoupled modes") {
    // zeros of sin^2(k) cos(k): k = pi/2 simple, pi double, 3 pi/2 simple, 2 pi double
    const double eps = 0.2;
    const MetricGraph g = testing::star(VertexCondition::kirchhoff(3), {1.0, 1.0, 1.0});
    const auto list = find_eigenvalues(g, eps, kL0, kL0 + eps * eps * 4.1 * kPi * kPi);
    REQUIRE(list.values.size() == 4);
    const int mult[] = {1, 2, 1, 2};
    for (int j = 0; j < 4; ++j) {
        CHECK(list.values[j].k == doctest::Approx((j + 1) * kPi / 2).epsilon(1e-11));
        CHECK(list.values[j].multiplicity == mult[j]);
    }
}

TEST_CASE("eigenvalue search rejects unbounded graphs and bad intervals") {
    CHECK_THROWS_AS(find_eigenvalues(testing::spider(VertexCondition::kirchhoff(3), 3), 0.1, kL0, 12.0), UsageError);
    CHECK_THROWS_AS(find_eigenvalues(testing::single_edge(1.0), 0.1, kL0 - 1.0, 12.0), UsageError);
    CHECK(find_eigenvalues(testing::single_edge(1.0), 0.1, kL0 + 0.001, kL0 + 0.002).values.empty());
}

TEST_CASE("eigenfunctions are normalized and satisfy the vertex rows") {
    const double eps = 0.15;
    const MetricGraph g = testing::star(VertexCondition::kirchhoff(3), {0.6, 1.0, 1.4});
    const auto list = find_eigenvalues(g, eps, kL0, kL0 + 0.5);
    REQUIRE(list.values.size() >= 3);
    for (const auto& e : list.values) {
        if (e.multiplicity != 1) continue;
        const AmplitudeField f = eigenfunction(g, eps, e.lambda);
        CHECK(l2_norm_squared(f) == doctest::Approx(1.0).epsilon(1e-10));
        // composite Simpson quadrature of |u|^2 as an independent check of the norm
        double quad = 0.0;
        for (int edge = 0; edge < g.edge_count(); ++edge) {
            const double l = g.edge(edge).length;
            const int n = 2000;
            double s = 0.0;
            for (int i = 0; i <= n; ++i) {
                const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
                s += w * std::norm(f.value(edge, l * i / n));
            }
            quad += s * l / (3.0 * n);
        }
        CHECK(quad == doctest::Approx(1.0).epsilon(1e-9));
        const SecularSystem sys = build_system(g, SpectralContext::at(g, e.lambda, eps));
        CHECK(vertex_residual(sys, f) < 1e-8 * operator_norm(sys.matrix));
    }
}

TEST_CASE("two Kirchhoff vertices of degree two transmit with the edge phase") {
    // lead - J0 - edge(l) - J1 - lead: reflection free, transmission exp(ikl)
    using namespace testing;
    const double l = 0.8, eps = 0.3;
    const MetricGraph g = make_graph({junction("J0", VertexCondition::kirchhoff(2)),
                                      junction("J1", VertexCondition::kirchhoff(2))},
                                     {lead("in", 0), finite_edge("mid", 0, 1, l), lead("out", 1)});
    const auto ctx = SpectralContext::at(g, cplx(kL0 + 5.0), eps);
    const NetworkSMatrix s = network_smatrix(g, ctx);
    CHECK(std::abs(s.S(0, 0)) < 1e-13);
    CHECK(std::abs(s.S(1, 0) - std::exp(cplx(0, 1) * ctx.k * l)) < 1e-13);
    CHECK(s.unitarity < 1e-13);
}

TEST_CASE("scattering solutions carry the S-matrix on every lead") {
    std::mt19937 rng(11);
    const CMatrix t = testing::random_symmetric_unitary(3, rng);
    const MetricGraph g = testing::spider(VertexCondition::constant(t), 3);
    const auto ctx = SpectralContext::at(g, cplx(kL0 + 7.0), 0.4);
    const NetworkSMatrix s = network_smatrix(g, ctx);
    CHECK((s.S - t).norm() < 1e-13);
    const AmplitudeField f = scattering_solution(g, ctx, 1);
    const double t0 = 2.5;
    for (int j = 0; j < 3; ++j) {
        const cplx expected = t(j, 1) * std::exp(cplx(0, 1) * ctx.k * t0) +
                              (j == 1 ? std::exp(cplx(0, -1) * ctx.k * t0) : cplx(0.0));
        CHECK(std::abs(f.value(j, t0) - expected) < 1e-12);
    }
}

TEST_CASE("spider Green function from scattering solutions") {
    std::mt19937 rng(5);
    const CMatrix t = testing::random_symmetric_unitary(4, rng);
    const MetricGraph g = testing::spider(VertexCondition::constant(t), 4);
    const auto ctx = SpectralContext::at(g, cplx(kL0 + 2.0), 0.2);
    for (int j = 0; j < 4; ++j)
        for (double x : {0.0, 0.3, 1.7}) {
            const cplx a = green_function(g, ctx, {2, 0.9}, j, x);
            const cplx b = green_via_scattering(g, ctx, {2, 0.9}, j, x);
            CHECK(std::abs(a - b) < 1e-12 * std::abs(a));
        }
}

TEST_CASE("parallel sweeps do not change results") {
    const MetricGraph g = testing::star(VertexCondition::kirchhoff(4), {0.5, 0.9, 1.1, 1.6});
    EigenOptions one, many;
    one.threads = 1;
    many.threads = 4;
    const auto a = find_eigenvalues(g, 0.1, kL0, kL0 + 0.4, one);
    const auto b = find_eigenvalues(g, 0.1, kL0, kL0 + 0.4, many);
    REQUIRE(a.values.size() == b.values.size());
    for (std::size_t i = 0; i < a.values.size(); ++i) CHECK(a.values[i].lambda == b.values[i].lambda);

    std::vector<int> hits(1000, 0);
    parallel_for(1000, [&](int i) { hits[i] += 1; }, 3);
    CHECK(std::count(hits.begin(), hits.end(), 1) == 1000);
    CHECK_THROWS_AS(parallel_for(10, [](int i) { if (i == 7) throw NumericalError("x"); }, 2), NumericalError);
}

TEST_CASE("deep below threshold: long edges and small eps stay regular") {
    // exp(kappa l / eps) ~ 1e31 between the a and b columns
    using namespace testing;
    const MetricGraph g = make_graph({junction("J0", VertexCondition::kirchhoff(3)),
                                      junction("J1", VertexCondition::kirchhoff(2)), free_end("f", FreeEndBC::robin(0.7))},
                                     {lead("in", 0), finite_edge("mid", 0, 1, 1.6), lead("out", 1),
                                      finite_edge("p", 0, 2, 1.2)});
    const auto ctx = SpectralContext::at(g, cplx(kL0 - 5.0), 0.05);
    const NetworkSMatrix s = network_smatrix(g, ctx);
    CHECK(s.imaginary < 1e-12);
    CHECK(s.symmetry < 1e-12);
}
