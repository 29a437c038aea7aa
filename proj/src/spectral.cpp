#include "wgnet/spectral.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

namespace wgnet {

namespace {

constexpr cplx kI{0.0, 1.0};
constexpr double kGolden = 0.6180339887498949;

struct SvdSample {
    double sigma_min;
    double sigma_max;
};

SvdSample sample(const CMatrix& m) {
    Eigen::JacobiSVD<CMatrix> svd(m);
    const auto& s = svd.singularValues();
    return {s(s.size() - 1), s(0)};
}

}  // namespace

int default_thread_count() {
    if (const char* env = std::getenv("WGNET_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(int n, const std::function<void(int)>& body, int threads) {
    if (threads <= 0) threads = default_thread_count();
    threads = std::min(threads, n);
    if (threads <= 1) {
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w) {
        pool.emplace_back([&] {
            for (int i = next++; i < n; i = next++) {
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

std::vector<KRoot> scan_roots(const std::function<CMatrix(double)>& matrix, double k_min,
                              double k_max, const ScanOptions& opt) {
    std::vector<KRoot> roots;
    if (!(k_max > k_min)) return roots;
    const double span = (k_max - k_min) * std::max(opt.length_scale, 1e-300);
    const int n = std::max(16, static_cast<int>(std::ceil(opt.resolution * span))) + 1;
    const double h = (k_max - k_min) / (n - 1);
    std::vector<double> sigma(n);
    parallel_for(
        n, [&](int i) { sigma[i] = sample(matrix(k_min + i * h)).sigma_min; }, opt.threads);

    std::vector<std::pair<double, double>> brackets;
    for (int i = 0; i < n; ++i) {
        const bool left_ok = i == 0 || sigma[i] <= sigma[i - 1];
        const bool right_ok = i == n - 1 || sigma[i] < sigma[i + 1];
        if (left_ok && right_ok)
            brackets.emplace_back(k_min + std::max(0, i - 1) * h, k_min + std::min(n - 1, i + 1) * h);
    }

    std::vector<KRoot> found(brackets.size());
    parallel_for(
        static_cast<int>(brackets.size()),
        [&](int b) {
            double lo = brackets[b].first, hi = brackets[b].second;
            double x1 = hi - kGolden * (hi - lo), x2 = lo + kGolden * (hi - lo);
            double f1 = sample(matrix(x1)).sigma_min, f2 = sample(matrix(x2)).sigma_min;
            while (hi - lo > kRefineWidth) {
                if (f1 <= f2) {
                    hi = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = hi - kGolden * (hi - lo);
                    f1 = sample(matrix(x1)).sigma_min;
                } else {
                    lo = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = lo + kGolden * (hi - lo);
                    f2 = sample(matrix(x2)).sigma_min;
                }
                if (x1 >= x2) break;
            }
            const double k = f1 <= f2 ? x1 : x2;
            Eigen::JacobiSVD<CMatrix> svd(matrix(k));
            const auto& s = svd.singularValues();
            const double tol = opt.tolerance * s(0);
            int mult = 0;
            for (Eigen::Index j = 0; j < s.size(); ++j)
                if (s(j) <= tol) ++mult;
            found[b] = {k, s(s.size() - 1), s(0), mult};
        },
        opt.threads);

    for (const auto& r : found) {
        if (r.multiplicity == 0) continue;
        if (!roots.empty() && std::abs(r.k - roots.back().k) < 1e3 * kRefineWidth) {
            if (r.sigma_min < roots.back().sigma_min) roots.back().k = r.k;
            roots.back().multiplicity = std::max(roots.back().multiplicity, r.multiplicity);
            continue;
        }
        roots.push_back(r);
    }
    return roots;
}

EigenvalueList find_eigenvalues(const MetricGraph& graph, double epsilon, double lambda_lo,
                                double lambda_hi, const EigenOptions& options) {
    if (!graph.bounded())
        throw UsageError("graph has infinite edges: eigenvalue search needs a bounded graph, use smatrix");
    if (!(epsilon > 0.0)) throw UsageError("epsilon must be positive");
    const double l0 = graph.lambda0(), l1 = graph.lambda1();
    if (lambda_lo < l0 || lambda_hi > l1 || !(lambda_lo <= lambda_hi))
        throw UsageError("eigenvalue interval must lie inside (lambda0, lambda1)");
    const double delta = options.branch_exclusion * (l1 - l0);
    EigenvalueList out;
    out.epsilon = epsilon;
    out.lambda_lo = std::max(lambda_lo, l0 + delta);
    out.lambda_hi = std::min(lambda_hi, l1 - delta);
    if (out.lambda_lo >= out.lambda_hi) return out;

    const double k_lo = std::sqrt(out.lambda_lo - l0) / epsilon;
    const double k_hi = std::sqrt(out.lambda_hi - l0) / epsilon;
    ScanOptions scan;
    scan.resolution = options.resolution;
    scan.length_scale = graph.max_finite_length();
    scan.tolerance = options.tolerance;
    scan.threads = options.threads;
    const auto roots = scan_roots(
        [&](double k) { return build_system(graph, SpectralContext::from_k(l0, k, epsilon)).matrix; },
        k_lo, k_hi, scan);
    for (const auto& r : roots)
        out.values.push_back({l0 + epsilon * epsilon * r.k * r.k, r.k, r.multiplicity, r.sigma_min});
    return out;
}

double l2_norm_squared(const AmplitudeField& f) {
    double total = 0.0;
    for (std::size_t e = 0; e < f.a.size(); ++e) {
        const double l = f.lengths[e];
        if (std::isinf(l)) continue;
        const cplx a = f.a[e], b = f.b[e];
        if (f.linear_basis) {
            total += std::norm(a) * l + std::real(a * std::conj(b)) * l * l + std::norm(b) * l * l * l / 3.0;
            continue;
        }
        const cplx k = f.k;
        if (k.imag() != 0.0)
            throw UsageError("closed-form norm requires a real wavenumber");
        total += l * (std::norm(a) + std::norm(b));
        const cplx cross = std::abs(k) * l < 1e-12 ? cplx(l) : (std::exp(2.0 * kI * k * l) - 1.0) / (2.0 * kI * k);
        total += 2.0 * std::real(a * std::conj(b) * cross);
    }
    return total;
}

AmplitudeField eigenfunction(const MetricGraph& graph, double epsilon, double lambda,
                             double tolerance) {
    if (!graph.bounded()) throw UsageError("eigenfunctions need a bounded graph");
    const auto ctx = SpectralContext::at(graph, lambda, epsilon);
    const SecularSystem sys = build_system(graph, ctx);
    Eigen::JacobiSVD<CMatrix> svd(sys.matrix, Eigen::ComputeFullV);
    const auto& s = svd.singularValues();
    const Eigen::Index last = s.size() - 1;
    if (s(last) > tolerance * s(0))
        throw NumericalError("lambda is not an eigenvalue: sigma_min above tolerance");
    const CVector x = svd.matrixV().col(last);
    AmplitudeField f = field_from_solution(graph, sys, x, {}, epsilon);
    const double norm = std::sqrt(l2_norm_squared(f));
    // phase: largest sampled value made real positive
    cplx ref = 0.0;
    for (int e = 0; e < graph.edge_count(); ++e)
        for (double frac : {0.125, 0.25, 0.375, 0.5, 0.625, 0.75, 0.875}) {
            const cplx u = f.value(e, frac * graph.edge(e).length);
            if (std::abs(u) > std::abs(ref)) ref = u;
        }
    const cplx scale = (std::abs(ref) > 0.0 ? std::conj(ref) / std::abs(ref) : cplx(1.0)) / norm;
    for (auto& c : f.a) c *= scale;
    for (auto& c : f.b) c *= scale;
    return f;
}

namespace {

SecularSystem checked_lead_system(const MetricGraph& graph, const SpectralContext& ctx) {
    if (graph.bounded()) throw UsageError("graph has no infinite edges");
    return build_system(graph, ctx);
}

CVector lead_rhs(const SecularSystem& sys, const SpectralContext& ctx, int lead_edge) {
    const cplx ik = kI * ctx.k;
    return rhs_from(sys, [&](int e, bool at_start) {
        if (e == lead_edge && at_start) return EndpointData{1.0, -ik};
        return EndpointData{};
    });
}

}  // namespace

AmplitudeField scattering_solution(const MetricGraph& graph, const SpectralContext& ctx,
                                   int incident_edge) {
    if (incident_edge < 0 || incident_edge >= graph.edge_count() ||
        !graph.edge(incident_edge).infinite())
        throw UsageError("incident edge must be an infinite edge");
    const SecularSystem sys = checked_lead_system(graph, ctx);
    std::vector<cplx> beta(graph.edge_count(), 0.0);
    beta[incident_edge] = 1.0;
    const CVector x = solve_regular(sys, lead_rhs(sys, ctx, incident_edge));
    return field_from_solution(graph, sys, x, beta, ctx.epsilon);
}

NetworkSMatrix network_smatrix(const MetricGraph& graph, const SpectralContext& ctx) {
    const SecularSystem sys = checked_lead_system(graph, ctx);
    const auto& leads = graph.leads();
    const int m = static_cast<int>(leads.size());
    CMatrix rhs(sys.size(), m);
    for (int p = 0; p < m; ++p) rhs.col(p) = lead_rhs(sys, ctx, leads[p]);
    const CMatrix x = solve_regular(sys, rhs);
    NetworkSMatrix out;
    out.lambda = ctx.lambda;
    out.epsilon = ctx.epsilon;
    out.S.resize(m, m);
    for (int p = 0; p < m; ++p)
        for (int j = 0; j < m; ++j) out.S(j, p) = x(sys.column_a[leads[j]], p);
    out.unitarity = unitarity_deviation(out.S);
    out.symmetry = symmetry_deviation(out.S);
    out.imaginary = operator_norm(out.S.imag().cast<cplx>());
    return out;
}

cplx scattering_green_coefficient(const SpectralContext& ctx, double tau) {
    return kI * std::exp(kI * ctx.k * tau) / (2.0 * ctx.k * ctx.epsilon * ctx.epsilon);
}

cplx green_via_scattering(const MetricGraph& graph, const SpectralContext& ctx, PointSource source,
                          int target_edge, double target_t) {
    if (graph.junction_count() != 1 || graph.finite_edge_count() != 0)
        throw UsageError("scattering expansion of the Green function needs a spider graph");
    if (ctx.q == cplx(0.0)) throw UsageError("lambda must differ from lambda0");
    const auto& leads = graph.leads();
    auto lead_of = [&](int e) {
        auto it = std::find(leads.begin(), leads.end(), e);
        if (it == leads.end()) throw UsageError("edge is not a lead");
        return static_cast<int>(it - leads.begin());
    };
    const int q = lead_of(source.edge);
    const int j = lead_of(target_edge);
    if (!(source.tau > 0.0)) throw UsageError("source point must lie strictly inside its lead");
    const CMatrix S = network_smatrix(graph, ctx).S;
    const cplx A = scattering_green_coefficient(ctx, source.tau);
    const cplx ik = kI * ctx.k;
    auto psi = [&](double t) { return std::exp(-ik * t) + S(q, q) * std::exp(ik * t); };
    if (j != q) return A * S(j, q) * std::exp(ik * target_t);
    if (target_t <= source.tau) return A * psi(target_t);
    const cplx B = A * psi(source.tau) * std::exp(-ik * source.tau);
    return B * std::exp(ik * target_t);
}

}  // namespace wgnet
