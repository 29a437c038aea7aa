#pragma once

// Secular system for plane-wave amplitudes on a metric graph.
//
// Finite edge e:   u_e(t) = a_e exp(ikt) + b_e exp(-ikt), unknowns a_e, b_e.
// Infinite edge e: u_e(t) = a_e exp(ikt) + beta_e exp(-ikt), unknown a_e; beta_e is data.
// k = sqrt(lambda - lambda0) / eps with Im k >= 0. All rows are written in k, so every
// entry has the form c(lambda) exp(iks) with s in {0, +l_e, -l_e}.

#include <complex>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "wgnet/common.hpp"
#include "wgnet/graph_model.hpp"

namespace wgnet {

/// Relative singular-value threshold marking a spectral point: sigma_min <= tol * ||M||.
inline constexpr double kSingularityTolerance = 1e-8;

struct SpectralContext {
    cplx lambda;
    double epsilon = 1.0;
    double lambda0 = 0.0;
    cplx q;  // sqrt(lambda - lambda0), Im q >= 0
    cplx k;  // q / epsilon

    static SpectralContext at(double lambda0, cplx lambda, double epsilon);
    static SpectralContext at(const MetricGraph& g, cplx lambda, double epsilon) {
        return at(g.lambda0(), lambda, epsilon);
    }
    /// Context for a given wavenumber (Im k >= 0): lambda = lambda0 + eps^2 k^2.
    static SpectralContext from_k(double lambda0, cplx k, double epsilon);

    bool real_lambda() const { return lambda.imag() == 0.0; }
};

enum class Coefficient { A, B };

struct ColumnInfo {
    int edge = -1;
    Coefficient coefficient = Coefficient::A;
};

/// One endpoint of an edge inside a row: row += value_coeff * u(0) + deriv_coeff * u'(0),
/// both taken in the vertex-local coordinate s.
struct EndpointTerm {
    int edge = -1;
    bool at_start = true;
    cplx value_coeff{0.0, 0.0};
    cplx deriv_coeff{0.0, 0.0};
};

struct RowInfo {
    int vertex = -1;
    std::string kind;  // junction, dirichlet, neumann, robin, projection-value, projection-derivative
    int index = 0;     // row index within the vertex block
    std::vector<EndpointTerm> terms;
};

struct SecularSystem {
    CMatrix matrix;
    RMatrix exponent;  // s with matrix(r, c) = c(lambda) exp(i k s); zero where matrix is zero
    std::vector<RowInfo> rows;
    std::vector<ColumnInfo> columns;
    std::vector<int> column_a;  // per edge: column of a_e
    std::vector<int> column_b;  // per edge: column of b_e, -1 for infinite edges
    cplx k;
    bool linear_basis = false;  // k = 0: u_e(t) = a_e + b_e t

    int size() const { return static_cast<int>(matrix.rows()); }
};

/// Value and s-derivative of a prescribed (non-unknown) field part at an edge endpoint.
struct EndpointData {
    cplx value{0.0, 0.0};
    cplx derivative{0.0, 0.0};
};

/// Vertex rows of the graph problem: gluing conditions at junctions, Dirichlet/Neumann/Robin
/// rows at free ends. Junction rows are i(I+T)u'(0) - k(I-T)u(0) (the eps-scaled form).
std::vector<RowInfo> vertex_rows(const MetricGraph& graph, const SpectralContext& context);

/// Builds the matrix from arbitrary vertex rows at wavenumber k.
SecularSystem assemble(const MetricGraph& graph, cplx k, std::vector<RowInfo> rows);

SecularSystem build_system(const MetricGraph& graph, const SpectralContext& context);

/// Determinant by partially pivoted LU.
cplx secular_determinant(const MetricGraph& graph, const SpectralContext& context);
cplx secular_determinant(const SecularSystem& system);

/// Smallest singular value of M.
double singularity_proximity(const MetricGraph& graph, const SpectralContext& context);
double singularity_proximity(const SecularSystem& system);

/// Right-hand side collecting the rows applied to a prescribed field part.
CVector rhs_from(const SecularSystem& system,
                 const std::function<EndpointData(int edge, bool at_start)>& known);

/// Solves M x = rhs after column equilibration M D; throws SpectralPointError if
/// sigma_min(M D) <= kSingularityTolerance * ||M D||.
CVector solve_regular(const SecularSystem& system, const CVector& rhs);
CMatrix solve_regular(const SecularSystem& system, const CMatrix& rhs);

struct PointSource {
    int edge = -1;
    double tau = 0.0;
};

/// Plane-wave representation of a solution on the graph, optionally with the Green
/// particular solution sin(k (t - tau)_-) / (eps^2 k) on the source edge.
struct AmplitudeField {
    cplx k;
    double epsilon = 1.0;
    std::vector<cplx> a;
    std::vector<cplx> b;          // finite: unknown b_e; infinite: prescribed beta_e
    std::vector<double> lengths;  // kInf for infinite edges
    std::optional<PointSource> source;
    bool linear_basis = false;

    cplx value(int edge, double t) const;
    cplx derivative(int edge, double t) const;
    /// Extended-precision evaluation, used for finite-difference defect checks.
    std::complex<long double> value_ld(int edge, double t) const;
};

/// Field from a solution vector; `beta` holds the prescribed incident coefficient per edge
/// (only read for infinite edges, may be empty for zero).
AmplitudeField field_from_solution(const MetricGraph& graph, const SecularSystem& system,
                                   const CVector& x, const std::vector<cplx>& beta,
                                   double epsilon);

/// Green function -eps^2 g'' - (lambda - lambda0) g = delta(t - tau) with outgoing leads.
AmplitudeField green_solution(const MetricGraph& graph, const SpectralContext& context,
                              PointSource source);
cplx green_function(const MetricGraph& graph, const SpectralContext& context, PointSource source,
                    int target_edge, double target_t);

/// Residual of every vertex row applied to a field (max absolute value).
double vertex_residual(const SecularSystem& system, const AmplitudeField& field);

}  // namespace wgnet
