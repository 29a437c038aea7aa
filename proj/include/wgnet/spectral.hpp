#pragma once

// Eigenvalues of bounded graphs, scattering solutions and network S-matrices of graphs
// with leads, and the scattering-basis form of the spider Green function.

#include <functional>
#include <vector>

#include "wgnet/assembly.hpp"

namespace wgnet {

/// Scan points per unit of k * max edge length.
inline constexpr double kDefaultScanResolution = 2000.0;
/// Golden-section stopping width in k.
inline constexpr double kRefineWidth = 1e-12;
/// Branch-point exclusion around lambda0, relative to lambda1 - lambda0.
inline constexpr double kBranchExclusion = 1e-6;

/// Worker count for sweeps: WGNET_THREADS if set, else hardware concurrency.
int default_thread_count();

/// Runs body(i) for i in [0, n) on up to `threads` workers.
void parallel_for(int n, const std::function<void(int)>& body, int threads = 0);

struct KRoot {
    double k = 0.0;
    double sigma_min = 0.0;
    double norm = 0.0;
    int multiplicity = 0;
};

struct ScanOptions {
    double resolution = kDefaultScanResolution;  // points per unit k * length_scale
    double length_scale = 1.0;
    double tolerance = kSingularityTolerance;    // relative to ||M||
    int threads = 0;
};

/// Minima of sigma_min(M(k)) on (k_min, k_max) accepted as roots; matrix(k) builds M.
std::vector<KRoot> scan_roots(const std::function<CMatrix(double)>& matrix, double k_min,
                              double k_max, const ScanOptions& options);

struct Eigenvalue {
    double lambda = 0.0;
    double k = 0.0;
    int multiplicity = 0;
    double sigma_min = 0.0;
};

struct EigenvalueList {
    std::vector<Eigenvalue> values;
    double lambda_lo = 0.0;
    double lambda_hi = 0.0;
    double epsilon = 1.0;
};

struct EigenOptions {
    double resolution = kDefaultScanResolution;
    double tolerance = kSingularityTolerance;
    double branch_exclusion = kBranchExclusion;
    int threads = 0;
};

/// Eigenvalues in [lambda_lo, lambda_hi] of a bounded graph, ascending.
EigenvalueList find_eigenvalues(const MetricGraph& graph, double epsilon, double lambda_lo,
                                double lambda_hi, const EigenOptions& options = {});

/// Normalized eigenfunction at an accepted eigenvalue (unit L2 norm on the graph, real up to
/// rounding for real vertex data).
AmplitudeField eigenfunction(const MetricGraph& graph, double epsilon, double lambda,
                             double tolerance = kSingularityTolerance);

/// Closed-form L2 norm squared of a plane-wave field over all finite edges.
double l2_norm_squared(const AmplitudeField& field);

/// Solution with unit incident wave exp(-ikt) on lead `incident_edge`.
AmplitudeField scattering_solution(const MetricGraph& graph, const SpectralContext& context,
                                   int incident_edge);

struct NetworkSMatrix {
    CMatrix S;  // S(j, p): outgoing amplitude on lead j for incidence on lead p
    cplx lambda;
    double epsilon = 1.0;
    double unitarity = 0.0;
    double symmetry = 0.0;
    double imaginary = 0.0;
};

NetworkSMatrix network_smatrix(const MetricGraph& graph, const SpectralContext& context);

/// Green function of a spider graph built from its scattering solutions.
cplx green_via_scattering(const MetricGraph& graph, const SpectralContext& context,
                          PointSource source, int target_edge, double target_t);

/// Expansion coefficient of the Green function in the scattering solution of the source lead.
cplx scattering_green_coefficient(const SpectralContext& context, double tau);

}  // namespace wgnet
