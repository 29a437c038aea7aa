#include "wgnet/assembly.hpp"

#include <cmath>

namespace wgnet {

namespace {

constexpr cplx kI{0.0, 1.0};

// Endpoint value and s-derivative as linear forms in (a_e, b_e).
struct EndpointForm {
    cplx va, vb;  // value = va a + vb b
    cplx da, db;  // derivative = da a + db b
    double sa, sb;  // exponent s of the a and b entries
};

EndpointForm endpoint_form(cplx k, double length, bool at_start, bool linear) {
    if (linear) {
        if (at_start) return {1.0, 0.0, 0.0, 1.0, 0.0, 0.0};
        return {1.0, length, 0.0, -1.0, 0.0, 0.0};
    }
    if (at_start) return {1.0, 1.0, kI * k, -kI * k, 0.0, 0.0};
    const cplx e = std::exp(kI * k * length);
    const cplx ei = std::exp(-kI * k * length);
    return {e, ei, -kI * k * e, kI * k * ei, length, -length};
}

// sin(k x) / k, continuous at k = 0.
cplx sin_over_k(cplx k, double x) {
    if (std::abs(k) * std::abs(x) < 1e-8) return x;
    return std::sin(k * x) / k;
}

}  // namespace

SpectralContext SpectralContext::at(double lambda0, cplx lambda, double epsilon) {
    if (!(epsilon > 0.0)) throw UsageError("epsilon must be positive");
    SpectralContext c;
    c.lambda = lambda;
    c.epsilon = epsilon;
    c.lambda0 = lambda0;
    c.q = sqrt_upper(lambda - lambda0);
    c.k = c.q / epsilon;
    return c;
}

SpectralContext SpectralContext::from_k(double lambda0, cplx k, double epsilon) {
    if (!(epsilon > 0.0)) throw UsageError("epsilon must be positive");
    if (k.imag() < 0.0) throw UsageError("wavenumber must satisfy Im k >= 0");
    SpectralContext c;
    c.epsilon = epsilon;
    c.lambda0 = lambda0;
    c.k = k;
    c.q = epsilon * k;
    c.lambda = lambda0 + c.q * c.q;
    if (k.imag() == 0.0 || k.real() == 0.0) c.lambda.imag(0.0);
    return c;
}

std::vector<RowInfo> vertex_rows(const MetricGraph& graph, const SpectralContext& ctx) {
    if (ctx.real_lambda() && ctx.lambda.real() >= graph.lambda1())
        throw UsageError("lambda must lie below lambda1");
    if (!ctx.real_lambda() && ctx.lambda.imag() < 0.0)
        throw UsageError("complex lambda must have Im lambda > 0");
    std::vector<RowInfo> rows;
    for (int v = 0; v < static_cast<int>(graph.vertices().size()); ++v) {
        const Vertex& vx = graph.vertex(v);
        if (vx.kind == VertexKind::FreeEnd) {
            const int e = vx.order.front();
            const bool start = local_coordinate(graph, e, v).forward;
            RowInfo r{v, "", 0, {}};
            switch (vx.bc.type) {
                case FreeEndBC::Type::Dirichlet:
                    r.kind = "dirichlet";
                    r.terms.push_back({e, start, 1.0, 0.0});
                    break;
                case FreeEndBC::Type::Neumann:
                    r.kind = "neumann";
                    r.terms.push_back({e, start, 0.0, 1.0});
                    break;
                case FreeEndBC::Type::Robin:
                    // exterior normal is -d/ds: -eps u'(0) + alpha u(0) = 0, divided by eps
                    r.kind = "robin";
                    r.terms.push_back({e, start, vx.bc.alpha / ctx.epsilon, -1.0});
                    break;
            }
            rows.push_back(std::move(r));
            continue;
        }
        const CMatrix t = ctx.real_lambda()
                              ? evaluate(*vx.condition, ctx.lambda.real(), graph.lambda1())
                              : evaluate(*vx.condition, ctx.lambda, graph.lambda1());
        const int d = static_cast<int>(vx.order.size());
        for (int i = 0; i < d; ++i) {
            RowInfo r{v, "junction", i, {}};
            for (int j = 0; j < d; ++j) {
                const int e = vx.order[j];
                const bool start = local_coordinate(graph, e, v).forward;
                const cplx delta = i == j ? 1.0 : 0.0;
                r.terms.push_back({e, start, -ctx.k * (delta - t(i, j)), kI * (delta + t(i, j))});
            }
            rows.push_back(std::move(r));
        }
    }
    return rows;
}

SecularSystem assemble(const MetricGraph& graph, cplx k, std::vector<RowInfo> rows) {
    SecularSystem s;
    s.k = k;
    s.linear_basis = (k == cplx(0.0, 0.0));
    const int ne = graph.edge_count();
    s.column_a.assign(ne, -1);
    s.column_b.assign(ne, -1);
    for (int e = 0; e < ne; ++e) {
        s.column_a[e] = static_cast<int>(s.columns.size());
        s.columns.push_back({e, Coefficient::A});
        if (!graph.edge(e).infinite()) {
            s.column_b[e] = static_cast<int>(s.columns.size());
            s.columns.push_back({e, Coefficient::B});
        }
    }
    const int n = static_cast<int>(s.columns.size());
    if (static_cast<int>(rows.size()) != n)
        throw InputError("vertex rows (" + std::to_string(rows.size()) + ") do not match unknowns (" +
                         std::to_string(n) + ")");
    s.matrix = CMatrix::Zero(n, n);
    s.exponent = RMatrix::Zero(n, n);
    for (int r = 0; r < n; ++r) {
        for (const auto& term : rows[r].terms) {
            const Edge& ed = graph.edge(term.edge);
            const EndpointForm f = endpoint_form(k, ed.length, term.at_start, s.linear_basis);
            const int ca = s.column_a[term.edge];
            s.matrix(r, ca) += term.value_coeff * f.va + term.deriv_coeff * f.da;
            s.exponent(r, ca) = f.sa;
            const int cb = s.column_b[term.edge];
            if (cb >= 0) {
                s.matrix(r, cb) += term.value_coeff * f.vb + term.deriv_coeff * f.db;
                s.exponent(r, cb) = f.sb;
            }
        }
    }
    s.rows = std::move(rows);
    return s;
}

SecularSystem build_system(const MetricGraph& graph, const SpectralContext& context) {
    return assemble(graph, context.k, vertex_rows(graph, context));
}

cplx secular_determinant(const SecularSystem& system) {
    return Eigen::PartialPivLU<CMatrix>(system.matrix).determinant();
}

cplx secular_determinant(const MetricGraph& graph, const SpectralContext& context) {
    return secular_determinant(build_system(graph, context));
}

double singularity_proximity(const SecularSystem& system) {
    Eigen::JacobiSVD<CMatrix> svd(system.matrix);
    return svd.singularValues()(svd.singularValues().size() - 1);
}

double singularity_proximity(const MetricGraph& graph, const SpectralContext& context) {
    return singularity_proximity(build_system(graph, context));
}

CVector rhs_from(const SecularSystem& system,
                 const std::function<EndpointData(int, bool)>& known) {
    CVector rhs = CVector::Zero(system.size());
    for (int r = 0; r < system.size(); ++r) {
        for (const auto& term : system.rows[r].terms) {
            const EndpointData d = known(term.edge, term.at_start);
            rhs(r) -= term.value_coeff * d.value + term.deriv_coeff * d.derivative;
        }
    }
    return rhs;
}

CMatrix solve_regular(const SecularSystem& system, const CMatrix& rhs) {
    // column equilibration keeps exp(kl) and exp(-kl) columns comparable below threshold
    const int n = system.size();
    RVector scale(n);
    for (int c = 0; c < n; ++c) {
        const double m = system.matrix.col(c).cwiseAbs().maxCoeff();
        scale(c) = m > 0.0 ? 1.0 / m : 1.0;
    }
    const CMatrix scaled = system.matrix * scale.cast<cplx>().asDiagonal();
    Eigen::JacobiSVD<CMatrix> svd(scaled);
    const auto& sv = svd.singularValues();
    const double smin = sv(sv.size() - 1);
    if (smin <= kSingularityTolerance * sv(0))
        throw SpectralPointError("secular system is singular: lambda is a spectral point", smin);
    return scale.cast<cplx>().asDiagonal() * Eigen::FullPivLU<CMatrix>(scaled).solve(rhs);
}

CVector solve_regular(const SecularSystem& system, const CVector& rhs) {
    return solve_regular(system, CMatrix(rhs)).col(0);
}

cplx AmplitudeField::value(int e, double t) const {
    cplx u = linear_basis ? a[e] + b[e] * t
                          : a[e] * std::exp(kI * k * t) + b[e] * std::exp(-kI * k * t);
    if (source && source->edge == e && t < source->tau)
        u += sin_over_k(k, t - source->tau) / (epsilon * epsilon);
    return u;
}

cplx AmplitudeField::derivative(int e, double t) const {
    cplx du = linear_basis ? b[e]
                           : kI * k * (a[e] * std::exp(kI * k * t) - b[e] * std::exp(-kI * k * t));
    if (source && source->edge == e && t < source->tau)
        du += std::cos(k * (t - source->tau)) / (epsilon * epsilon);
    return du;
}

std::complex<long double> AmplitudeField::value_ld(int e, double t) const {
    using cl = std::complex<long double>;
    const cl ik = cl(0.0L, 1.0L) * cl(k.real(), k.imag());
    const cl A(a[e].real(), a[e].imag());
    const cl B(b[e].real(), b[e].imag());
    const long double tl = t;
    cl u = linear_basis ? A + B * tl : A * std::exp(ik * tl) + B * std::exp(-ik * tl);
    if (source && source->edge == e && t < source->tau) {
        const cl kk(k.real(), k.imag());
        const long double eps = epsilon;
        u += std::sin(kk * (tl - static_cast<long double>(source->tau))) / (kk * eps * eps);
    }
    return u;
}

AmplitudeField field_from_solution(const MetricGraph& graph, const SecularSystem& system,
                                   const CVector& x, const std::vector<cplx>& beta,
                                   double epsilon) {
    AmplitudeField f;
    f.k = system.k;
    f.epsilon = epsilon;
    f.linear_basis = system.linear_basis;
    const int ne = graph.edge_count();
    f.a.resize(ne);
    f.b.resize(ne);
    f.lengths.resize(ne);
    for (int e = 0; e < ne; ++e) {
        f.lengths[e] = graph.edge(e).length;
        f.a[e] = x(system.column_a[e]);
        if (system.column_b[e] >= 0) f.b[e] = x(system.column_b[e]);
        else f.b[e] = beta.empty() ? cplx(0.0) : beta[e];
    }
    return f;
}

AmplitudeField green_solution(const MetricGraph& graph, const SpectralContext& ctx,
                              PointSource source) {
    if (source.edge < 0 || source.edge >= graph.edge_count())
        throw UsageError("source edge does not exist");
    const Edge& se = graph.edge(source.edge);
    if (!(source.tau > 0.0) || !(source.tau < se.length))
        throw UsageError("source point must lie strictly inside edge " + se.id);
    const SecularSystem sys = build_system(graph, ctx);
    const double eps2 = ctx.epsilon * ctx.epsilon;
    const cplx p0 = sin_over_k(ctx.k, -source.tau) / eps2;
    const cplx dp0 = std::cos(ctx.k * source.tau) / eps2;
    const CVector rhs = rhs_from(sys, [&](int e, bool at_start) {
        if (e == source.edge && at_start) return EndpointData{p0, dp0};
        return EndpointData{};
    });
    AmplitudeField f = field_from_solution(graph, sys, solve_regular(sys, rhs), {}, ctx.epsilon);
    f.source = source;
    return f;
}

cplx green_function(const MetricGraph& graph, const SpectralContext& context, PointSource source,
                    int target_edge, double target_t) {
    if (target_edge < 0 || target_edge >= graph.edge_count())
        throw UsageError("target edge does not exist");
    return green_solution(graph, context, source).value(target_edge, target_t);
}

double vertex_residual(const SecularSystem& system, const AmplitudeField& field) {
    double worst = 0.0;
    for (const auto& row : system.rows) {
        cplx r = 0.0;
        for (const auto& term : row.terms) {
            const double len = field.lengths[term.edge];
            const double t = term.at_start ? 0.0 : len;
            const double sign = term.at_start ? 1.0 : -1.0;
            r += term.value_coeff * field.value(term.edge, t) +
                 term.deriv_coeff * sign * field.derivative(term.edge, t);
        }
        worst = std::max(worst, std::abs(r));
    }
    return worst;
}

}  // namespace wgnet
