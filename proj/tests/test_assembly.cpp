#include <doctest.h>

#include <cmath>
#include <random>

#include "test_support.hpp"
#include "wgnet/assembly.hpp"

using namespace wgnet;
using testing::kL0;

namespace {

// Dirichlet Green function of -eps^2 u'' - q^2 u on (0, l) by second-order finite
// differences on n interior points; the source is a unit mass at the node nearest tau.
std::vector<double> fd_green(double l, double eps, double q2, double tau, int n, double& h) {
    h = l / (n + 1);
    const int src = static_cast<int>(std::lround(tau / h)) - 1;
    std::vector<double> lower(n, -eps * eps / (h * h)), diag(n, 2 * eps * eps / (h * h) - q2),
        upper(n, -eps * eps / (h * h)), rhs(n, 0.0);
    rhs[src] = 1.0 / h;
    for (int i = 1; i < n; ++i) {  // Thomas algorithm
        const double m = lower[i] / diag[i - 1];
        diag[i] -= m * upper[i - 1];
        rhs[i] -= m * rhs[i - 1];
    }
    std::vector<double> u(n);
    u[n - 1] = rhs[n - 1] / diag[n - 1];
    for (int i = n - 2; i >= 0; --i) u[i] = (rhs[i] - upper[i] * u[i + 1]) / diag[i];
    return u;
}

double bisect(const std::function<double(double)>& f, double a, double b) {
    double fa = f(a);
    for (int i = 0; i < 200 && b - a > 1e-15 * std::max(1.0, b); ++i) {
        const double m = 0.5 * (a + b);
        const double fm = f(m);
        if ((fm < 0) == (fa < 0)) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    return 0.5 * (a + b);
}

}  // namespace

TEST_CASE("spectral context branch") {
    const auto above = SpectralContext::at(kL0, cplx(kL0 + 4.0), 0.5);
    CHECK(above.q.real() == doctest::Approx(2.0));
    CHECK(above.k.real() == doctest::Approx(4.0));
    const auto below = SpectralContext::at(kL0, cplx(kL0 - 4.0), 0.5);
    CHECK(below.k.imag() == doctest::Approx(4.0));
    CHECK(below.k.real() == 0.0);
    const auto lower_half = SpectralContext::at(kL0, cplx(kL0 + 1.0, -1e-3), 1.0);
    CHECK(lower_half.k.imag() >= 0.0);
    const auto back = SpectralContext::from_k(kL0, cplx(3.0, 0.0), 0.1);
    CHECK(back.lambda.real() == doctest::Approx(kL0 + 0.09));
}

TEST_CASE("single Dirichlet edge determinant is proportional to sin(kl)") {
    const MetricGraph g = testing::single_edge(1.3);
    const double eps = 0.2;
    cplx ratio0;
    for (double k : {0.7, 1.9, 4.4, 7.1}) {
        const auto ctx = SpectralContext::from_k(kL0, k, eps);
        const SecularSystem sys = build_system(g, ctx);
        CHECK(sys.size() == 2);
        const cplx r = secular_determinant(sys) / std::sin(k * 1.3);
        if (k == 0.7) ratio0 = r;
        CHECK(std::abs(r - ratio0) < 1e-12 * std::abs(ratio0));
    }
}

TEST_CASE("exponent matrix records exp(iks) with s in {0, +l, -l}") {
    const MetricGraph g = testing::star(VertexCondition::kirchhoff(3), {0.5, 1.0, 1.5});
    const auto ctx = SpectralContext::from_k(kL0, 2.3, 0.1);
    const SecularSystem sys = build_system(g, ctx);
    CHECK(sys.size() == 6);
    const auto ctx2 = SpectralContext::from_k(kL0, 2.3 + 1e-3, 0.1);
    const SecularSystem sys2 = build_system(g, ctx2);
    for (int r = 0; r < sys.size(); ++r)
        for (int c = 0; c < sys.size(); ++c) {
            const double s = sys.exponent(r, c);
            CHECK((s == 0.0 || std::abs(std::abs(s) - 0.5) < 1e-15 || std::abs(std::abs(s) - 1.0) < 1e-15 ||
                   std::abs(std::abs(s) - 1.5) < 1e-15));
            if (sys.matrix(r, c) == cplx(0.0)) continue;
            // the non-exponential factor is polynomial in k; for Kirchhoff rows it is affine
            const cplx c1 = sys.matrix(r, c) * std::exp(cplx(0, -2.3 * s));
            const cplx c2 = sys2.matrix(r, c) * std::exp(cplx(0, -(2.3 + 1e-3) * s));
            CHECK(std::abs(c2 - c1) < 2e-3 * std::max(1.0, std::abs(c1)));
        }
}

TEST_CASE("Kirchhoff star determinant vanishes where the sum of cotangents does") {
    const std::vector<double> l{0.7, 1.0, 1.3};
    const MetricGraph g = testing::star(VertexCondition::kirchhoff(3), l);
    auto f = [&](double k) {
        double s = 0.0;
        for (double x : l) s += std::cos(k * x) / std::sin(k * x);
        return s;
    };
    // between the poles pi/1.3 and pi/1.0 the cotangent sum decreases from +inf to -inf
    const double root = bisect(f, kPi / 1.3 + 1e-9, kPi / 1.0 - 1e-9);
    const double eps = 0.1;
    const auto at = SpectralContext::from_k(kL0, root, eps);
    const SecularSystem sys = build_system(g, at);
    const double norm = operator_norm(sys.matrix);
    CHECK(singularity_proximity(sys) < 1e-12 * norm);
    const auto off = SpectralContext::from_k(kL0, root + 0.05, eps);
    CHECK(singularity_proximity(g, off) > 1e-4 * norm);
}

TEST_CASE("Robin end eigenvalue condition tan(kl) = -eps k / alpha") {
    const double eps = 0.2, alpha = 0.7, l = 1.0;
    const MetricGraph g = testing::single_edge(l, FreeEndBC::robin(alpha), FreeEndBC::dirichlet());
    auto f = [&](double k) { return eps * k * std::cos(k * l) + alpha * std::sin(k * l); };
    const double root = bisect(f, kPi / 2 + 1e-6, kPi - 1e-6);
    const SecularSystem sys = build_system(g, SpectralContext::from_k(kL0, root, eps));
    CHECK(singularity_proximity(sys) < 1e-12 * operator_norm(sys.matrix));

    // reversed edge orientation gives the same condition
    const MetricGraph r = testing::make_graph({testing::free_end("a"), testing::free_end("b", FreeEndBC::robin(alpha))},
                                              {testing::finite_edge("e", 0, 1, l)});
    const SecularSystem sr = build_system(r, SpectralContext::from_k(kL0, root, eps));
    CHECK(singularity_proximity(sr) < 1e-12 * operator_norm(sr.matrix));
}

TEST_CASE("Green function on a Dirichlet edge against the closed form and finite differences") {
    const double l = 1.0, eps = 0.3;
    const MetricGraph g = testing::single_edge(l);
    for (double dl : {-2.0, 0.6}) {
        const auto ctx = SpectralContext::at(g, cplx(kL0 + dl), eps);
        const double tau = 0.37;
        const cplx k = ctx.k;
        auto exact = [&](double t) {
            const double lo = std::min(t, tau), hi = std::max(t, tau);
            return std::sin(k * lo) * std::sin(k * (l - hi)) / (eps * eps * k * std::sin(k * l));
        };
        const AmplitudeField f = green_solution(g, ctx, {0, tau});
        for (double t : {0.0, 0.1, 0.37, 0.5, 0.9, 1.0}) CHECK(std::abs(f.value(0, t) - exact(t)) < 1e-12);
        CHECK(vertex_residual(build_system(g, ctx), f) < 1e-12);

        double h = 0.0;
        const int n = 3999;
        const auto u = fd_green(l, eps, dl, 0.37, n, h);
        const double tau_fd = (std::lround(0.37 / h)) * h;
        const AmplitudeField ff = green_solution(g, ctx, {0, tau_fd});
        double err = 0.0, scale = 0.0;
        for (int i = 0; i < n; i += 97) {
            err = std::max(err, std::abs(ff.value(0, (i + 1) * h).real() - u[i]));
            scale = std::max(scale, std::abs(u[i]));
        }
        CHECK(err < 1e-5 * scale);
    }
}

TEST_CASE("Green function on the full line built from two leads") {
    const double eps = 0.25;
    const MetricGraph g = testing::spider(VertexCondition::kirchhoff(2), 2);
    const auto ctx = SpectralContext::at(g, cplx(kL0 + 3.0), eps);
    const cplx k = ctx.k;
    const double tau = 0.4;
    auto line = [&](double d) { return cplx(0, 1) * std::exp(cplx(0, 1) * k * d) / (2.0 * eps * eps * k); };
    for (double t : {0.0, 0.2, 0.4, 1.0, 3.0}) {
        CHECK(std::abs(green_function(g, ctx, {0, tau}, 0, t) - line(std::abs(t - tau))) < 1e-12);
        CHECK(std::abs(green_function(g, ctx, {0, tau}, 1, t) - line(t + tau)) < 1e-12);
    }
    // below the threshold the kernel decays
    const auto below = SpectralContext::at(g, cplx(kL0 - 3.0), eps);
    const cplx kb = below.k;
    const cplx expected = cplx(0, 1) * std::exp(cplx(0, 1) * kb * 2.0) / (2.0 * eps * eps * kb);
    CHECK(std::abs(green_function(g, below, {1, 1.5}, 1, 3.5) - expected) < 1e-12);
}

TEST_CASE("spectral points are reported, not solved through") {
    const double eps = 0.1;
    const MetricGraph g = testing::single_edge(1.0);
    const auto ctx = SpectralContext::from_k(kL0, kPi, eps);
    CHECK_THROWS_AS(green_solution(g, ctx, {0, 0.3}), SpectralPointError);
}
