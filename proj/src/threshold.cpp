#include "wgnet/threshold.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace wgnet {

ThresholdProblem make_threshold_problem(const MetricGraph& graph, double snap_tolerance) {
    ThresholdProblem p{graph, {}};
    p.decompositions.resize(graph.vertices().size());
    for (int v = 0; v < static_cast<int>(graph.vertices().size()); ++v) {
        const Vertex& vx = graph.vertex(v);
        if (vx.kind != VertexKind::Junction) continue;
        try {
            p.decompositions[v] = threshold_decomposition(*vx.condition, graph.lambda0(),
                                                          snap_tolerance, snap_tolerance);
        } catch (const Error& e) {
            throw InputError(std::string("threshold decomposition failed: ") + e.what(), vx.id);
        }
    }
    return p;
}

std::vector<RowInfo> threshold_rows(const ThresholdProblem& problem) {
    const MetricGraph& g = problem.graph;
    std::vector<RowInfo> rows;
    for (int v = 0; v < static_cast<int>(g.vertices().size()); ++v) {
        const Vertex& vx = g.vertex(v);
        if (vx.kind == VertexKind::FreeEnd) {
            const int e = vx.order.front();
            const bool start = local_coordinate(g, e, v).forward;
            const bool dirichlet = vx.bc.type == FreeEndBC::Type::Dirichlet ||
                                   (vx.bc.type == FreeEndBC::Type::Robin && vx.bc.alpha > 0.0);
            RowInfo r{v, dirichlet ? "dirichlet" : "neumann", 0, {}};
            r.terms.push_back({e, start, dirichlet ? 1.0 : 0.0, dirichlet ? 0.0 : 1.0});
            rows.push_back(std::move(r));
            continue;
        }
        const ThresholdDecomposition& dec = *problem.decompositions[v];
        const int d = static_cast<int>(vx.order.size());
        int index = 0;
        auto add = [&](const RMatrix& basis, bool value) {
            for (Eigen::Index c = 0; c < basis.cols(); ++c) {
                RowInfo r{v, value ? "projection-value" : "projection-derivative", index++, {}};
                for (int j = 0; j < d; ++j) {
                    const int e = vx.order[j];
                    const bool start = local_coordinate(g, e, v).forward;
                    const double q = basis(j, c);
                    r.terms.push_back({e, start, value ? q : 0.0, value ? 0.0 : q});
                }
                rows.push_back(std::move(r));
            }
        };
        add(dec.minus_basis, true);
        add(dec.plus_basis, false);
    }
    return rows;
}

SecularSystem threshold_system(const ThresholdProblem& problem, double k) {
    if (!problem.graph.bounded())
        throw UsageError("limiting eigenvalues need a bounded graph");
    return assemble(problem.graph, cplx(k, 0.0), threshold_rows(problem));
}

int zero_mode_multiplicity(const ThresholdProblem& problem, double tolerance) {
    const SecularSystem sys = threshold_system(problem, 0.0);
    Eigen::JacobiSVD<CMatrix> svd(sys.matrix);
    const auto& s = svd.singularValues();
    int mult = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s(i) <= tolerance * s(0)) ++mult;
    return mult;
}

std::vector<LimitEigenvalue> limiting_eigenvalues(const ThresholdProblem& problem, int count,
                                                  const ThresholdOptions& options) {
    if (count < 1) throw UsageError("eigenvalue count must be positive");
    const MetricGraph& g = problem.graph;
    if (!g.bounded()) throw UsageError("limiting eigenvalues need a bounded graph");
    std::vector<LimitEigenvalue> out;
    const int zero = zero_mode_multiplicity(problem, options.tolerance);
    const double length = g.max_finite_length();
    ScanOptions scan;
    scan.resolution = options.resolution;
    scan.length_scale = length;
    scan.tolerance = options.tolerance;
    scan.threads = options.threads;
    const double k_min = 1e-3 / length;
    // an irrational start keeps the scan boundary off the common roots k = n pi / l
    double k_max = 2.718281828459045 * kPi / length;
    for (int attempt = 0; attempt < 20; ++attempt, k_max *= 2.0) {
        out.clear();
        int total = 0;
        if (zero > 0) {
            out.push_back({0.0, zero, 0.0});
            total += zero;
        }
        const auto roots = scan_roots([&](double k) { return threshold_system(problem, k).matrix; },
                                      k_min, k_max, scan);
        for (const auto& r : roots) {
            // a root on the scan boundary may be a truncated cluster; rescan wider
            if (r.k >= k_max * (1.0 - 1e-9)) break;
            out.push_back({r.k * r.k, r.multiplicity, r.sigma_min});
            total += r.multiplicity;
        }
        if (total >= count) return out;
    }
    throw NumericalError("limiting eigenvalue search did not reach the requested count");
}

std::vector<double> expand_multiplicity(const std::vector<LimitEigenvalue>& values, int count) {
    std::vector<double> out;
    for (const auto& v : values)
        for (int i = 0; i < v.multiplicity && static_cast<int>(out.size()) < count; ++i)
            out.push_back(v.mu);
    return out;
}

EpsFamily eps_family(const MetricGraph& graph, const std::vector<double>& eps_list, int count,
                     const ThresholdOptions& options) {
    const ThresholdProblem problem = make_threshold_problem(graph);
    EpsFamily fam;
    fam.limit = expand_multiplicity(limiting_eigenvalues(problem, count, options), count);
    fam.epsilon = eps_list;
    fam.mu.resize(eps_list.size(), count);
    const double l0 = graph.lambda0();
    const double reach = 1.5 * fam.limit.back() + 1.0;
    for (std::size_t i = 0; i < eps_list.size(); ++i) {
        const double eps = eps_list[i];
        EigenOptions eo;
        eo.resolution = options.resolution;
        eo.tolerance = options.tolerance;
        eo.threads = options.threads;
        const double hi = std::min(l0 + reach * eps * eps, graph.lambda1());
        const auto list = find_eigenvalues(graph, eps, l0, hi, eo);
        std::vector<double> mu;
        for (const auto& e : list.values)
            for (int m = 0; m < e.multiplicity; ++m) mu.push_back((e.lambda - l0) / (eps * eps));
        if (static_cast<int>(mu.size()) < count)
            throw NumericalError("eps = " + std::to_string(eps) + ": found " + std::to_string(mu.size()) +
                                 " eigenvalues near lambda0, need " + std::to_string(count));
        std::vector<bool> used(mu.size(), false);
        for (int j = 0; j < count; ++j) {
            const double target = fam.limit[j];
            int best = -1;
            double best_d = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < mu.size(); ++c) {
                if (used[c]) continue;
                const double d = std::abs(mu[c] - target);
                if (best >= 0 && std::abs(d - best_d) <= 1e-12 * std::max(1.0, target) &&
                    std::abs(mu[c] - mu[best]) > 1e-9 * std::max(1.0, target))
                    throw NumericalError("ambiguous match for limiting eigenvalue " +
                                         std::to_string(target) + " at eps = " + std::to_string(eps));
                if (d < best_d) {
                    best_d = d;
                    best = static_cast<int>(c);
                }
            }
            used[best] = true;
            fam.mu(i, j) = mu[best];
        }
    }
    return fam;
}

double fitted_order(const std::vector<double>& eps, const std::vector<double>& errors) {
    if (eps.size() != errors.size() || eps.size() < 2)
        throw UsageError("order fit needs at least two (eps, error) pairs");
    const std::size_t n = eps.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = std::log(eps[i]);
        const double y = std::log(std::max(std::abs(errors[i]), 1e-300));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

LimitClassification classify_limit(const ThresholdProblem& problem) {
    LimitClassification out;
    const MetricGraph& g = problem.graph;
    for (int v = 0; v < static_cast<int>(g.vertices().size()); ++v) {
        if (!problem.decompositions[v]) continue;
        const auto& dec = *problem.decompositions[v];
        JunctionClassification jc;
        jc.vertex = g.vertex(v).id;
        jc.degree = dec.degree;
        jc.k = dec.k;
        if (dec.k == dec.degree) {
            jc.classification = ThresholdClass::Dirichlet;
        } else if (dec.k == dec.degree - 1) {
            RVector w = dec.plus_basis.col(0);
            if (w(0) < 0.0) w = -w;
            jc.plus_vector = w;
            jc.classification =
                (w.array() > 1e-10).all() ? ThresholdClass::Kirchhoff : ThresholdClass::Mixed;
        } else {
            jc.classification = ThresholdClass::Mixed;
        }
        out.junctions.push_back(std::move(jc));
    }
    auto all = [&](ThresholdClass c) {
        return !out.junctions.empty() &&
               std::all_of(out.junctions.begin(), out.junctions.end(),
                           [&](const JunctionClassification& j) { return j.classification == c; });
    };
    if (all(ThresholdClass::Kirchhoff)) out.label = "Kirchhoff problem";
    else if (all(ThresholdClass::Dirichlet)) out.label = "Dirichlet problem";
    else out.label = "mixed";
    return out;
}

}  // namespace wgnet
