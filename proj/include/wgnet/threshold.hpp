#pragma once

// Threshold regime lambda = lambda0 + mu eps^2. The limiting problem is -u'' = mu u on the
// graph with P u(0) = 0 and P_perp u'(0) = 0 at every junction (T frozen at lambda0).

#include <optional>
#include <string>
#include <vector>

#include "wgnet/assembly.hpp"
#include "wgnet/spectral.hpp"
#include "wgnet/vertex_conditions.hpp"

namespace wgnet {

struct ThresholdProblem {
    MetricGraph graph;
    std::vector<std::optional<ThresholdDecomposition>> decompositions;  // per vertex
};

/// Decomposes T_v(lambda0) at every junction; throws InputError naming the failing vertex.
ThresholdProblem make_threshold_problem(const MetricGraph& graph,
                                        double snap_tolerance = kThresholdSnapTolerance);

/// Rows of the limiting problem. Free ends: Dirichlet and Robin(alpha > 0) give u = 0,
/// Neumann and Robin(0) give u' = 0.
std::vector<RowInfo> threshold_rows(const ThresholdProblem& problem);

/// Limiting system at k = sqrt(mu); k = 0 switches to the linear basis a + b t.
SecularSystem threshold_system(const ThresholdProblem& problem, double k);

struct LimitEigenvalue {
    double mu = 0.0;
    int multiplicity = 0;
    double sigma_min = 0.0;
};

struct ThresholdOptions {
    double resolution = kDefaultScanResolution;
    double tolerance = kSingularityTolerance;
    int threads = 0;
};

/// Multiplicity of mu = 0 (0 if absent), from the linear-basis system.
int zero_mode_multiplicity(const ThresholdProblem& problem,
                           double tolerance = kSingularityTolerance);

/// Smallest limiting eigenvalues, clustered with multiplicity, covering at least `count`
/// eigenvalues counted with multiplicity.
std::vector<LimitEigenvalue> limiting_eigenvalues(const ThresholdProblem& problem, int count,
                                                  const ThresholdOptions& options = {});

/// The same list expanded by multiplicity and cut to `count` entries.
std::vector<double> expand_multiplicity(const std::vector<LimitEigenvalue>& values, int count);

struct EpsFamily {
    std::vector<double> limit;    // mu_j, expanded by multiplicity
    std::vector<double> epsilon;  // rows
    RMatrix mu;                   // mu(i, j) = (lambda_j(eps_i) - lambda0) / eps_i^2, matched to limit[j]
};

EpsFamily eps_family(const MetricGraph& graph, const std::vector<double>& eps_list, int count,
                     const ThresholdOptions& options = {});

/// Least-squares slope of log|error| against log eps.
double fitted_order(const std::vector<double>& eps, const std::vector<double>& errors);

struct JunctionClassification {
    std::string vertex;
    int degree = 0;
    int k = 0;
    ThresholdClass classification = ThresholdClass::Mixed;
    RVector plus_vector;  // +1 eigenvector (sign-normalized) when k = d - 1
};

struct LimitClassification {
    std::vector<JunctionClassification> junctions;
    std::string label;  // "Kirchhoff problem", "Dirichlet problem" or "mixed"
};

/// Kirchhoff-type: k = d - 1 with a strictly positive +1 eigenvector (entries > 1e-10
/// after sign normalization); Dirichlet-type: k = d.
LimitClassification classify_limit(const ThresholdProblem& problem);

}  // namespace wgnet
