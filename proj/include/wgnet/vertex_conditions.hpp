#pragma once

// Vertex gluing data: lambda-dependent scattering matrices T_v(lambda) attached to
// junction vertices, their validation, and the threshold eigenprojection split.

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "wgnet/common.hpp"

namespace wgnet {

inline constexpr double kAnalyticTolerance = 1e-10;
inline constexpr double kTabulatedTolerance = 1e-6;
inline constexpr double kThresholdSnapTolerance = 1e-6;

struct KirchhoffCondition {
    int degree = 0;
};

struct ConstantCondition {
    CMatrix matrix;
};

/// Scattering matrices sampled on an increasing lambda grid, interpolated entrywise linearly;
/// between unitary nodes the interpolant is replaced by its unitary polar factor.
struct TabulatedCondition {
    int degree = 0;
    double lambda0 = 0.0;
    std::vector<double> grid;
    std::vector<CMatrix> matrices;
    /// Optional per-node diagnostics carried through from the producer.
    std::vector<double> unitarity_deviation;
    std::vector<double> asymmetry;
    /// Grid spacing of the producing solver, when known (0 otherwise).
    double spacing = 0.0;
    /// Permits evaluating T(lambda0) by extrapolation in sqrt(lambda - lambda0)
    /// when the grid starts above the threshold.
    bool allow_threshold_extrapolation = false;
};

class VertexCondition {
public:
    using Variant = std::variant<KirchhoffCondition, ConstantCondition, TabulatedCondition>;

    static VertexCondition kirchhoff(int degree);
    static VertexCondition constant(CMatrix matrix);
    static VertexCondition tabulated(TabulatedCondition table, std::string source_path = {});

    int degree() const;
    bool is_kirchhoff() const { return std::holds_alternative<KirchhoffCondition>(*data_); }
    bool is_constant() const { return std::holds_alternative<ConstantCondition>(*data_); }
    bool is_tabulated() const { return std::holds_alternative<TabulatedCondition>(*data_); }
    bool lambda_independent() const { return !is_tabulated(); }

    const Variant& data() const { return *data_; }
    const TabulatedCondition& table() const { return std::get<TabulatedCondition>(*data_); }

    /// Path the table was loaded from (empty for inline or analytic data).
    const std::string& source_path() const { return source_path_; }

    /// Default validation tolerance: tighter for analytic data than for tabulated data.
    double default_tolerance() const {
        return is_tabulated() ? kTabulatedTolerance : kAnalyticTolerance;
    }

private:
    explicit VertexCondition(Variant v, std::string source = {})
        : data_(std::make_shared<const Variant>(std::move(v))), source_path_(std::move(source)) {}

    std::shared_ptr<const Variant> data_;
    std::string source_path_;
};

/// Kirchhoff scattering matrix: diagonal 2/d - 1, off-diagonal 2/d.
RMatrix kirchhoff_matrix(int degree);

/// T_v(lambda). Throws UsageError for lambda >= lambda1 or outside a tabulated range.
CMatrix evaluate(const VertexCondition& condition, double lambda,
                 double lambda1 = kInf);

/// Complex lambda is accepted only for lambda-independent conditions.
CMatrix evaluate(const VertexCondition& condition, cplx lambda, double lambda1 = kInf);

struct ValidationReport {
    double unitarity = 0.0;      // max ||T T* - I|| over samples in (lambda0, lambda1)
    double symmetry = 0.0;       // max ||T - T^T|| over samples in (lambda0, lambda1)
    double imaginary = 0.0;      // max ||Im T|| over samples below lambda0
    double orthogonality = 0.0;  // max ||T T^T - I|| over samples below lambda0
    std::size_t samples_above = 0;
    std::size_t samples_below = 0;
    double tolerance = 0.0;
    bool pass = true;
};

/// Report-only check of unitarity/symmetry above lambda0 and orthogonality below it.
/// A non-positive tolerance selects the condition's default tolerance.
ValidationReport validate_condition(const VertexCondition& condition,
                                    std::span<const double> lambda_samples, double lambda0,
                                    double lambda1 = kInf, double tolerance = 0.0);

/// Deviation measures used across modules (operator norm).
double unitarity_deviation(const CMatrix& t);
double symmetry_deviation(const CMatrix& t);
double orthogonality_deviation(const CMatrix& t);

enum class ThresholdClass { Dirichlet, Kirchhoff, Mixed };
std::string to_string(ThresholdClass c);

struct ThresholdDecomposition {
    int degree = 0;
    int k = 0;             // rank of P (Dirichlet-type directions)
    RMatrix P;             // projection onto the -1 eigenspace of T(lambda0)
    RMatrix P_perp;        // projection onto the +1 eigenspace
    RMatrix minus_basis;   // d x k orthonormal basis of range(P)
    RMatrix plus_basis;    // d x (d-k) orthonormal basis of range(P_perp)
    ThresholdClass classification = ThresholdClass::Mixed;
    double max_snap = 0.0; // largest |eigenvalue - (+-1)| before snapping
};

/// T_v(lambda0): exact for analytic data, table node or sqrt-extrapolation for tables.
CMatrix threshold_matrix(const VertexCondition& condition, double lambda0);

ThresholdDecomposition threshold_decomposition(const VertexCondition& condition, double lambda0,
                                               double snap_tolerance = kThresholdSnapTolerance,
                                               double symmetry_tolerance = kThresholdSnapTolerance);

/// Same, from an explicit matrix.
ThresholdDecomposition threshold_decomposition(const CMatrix& t_at_threshold,
                                               double snap_tolerance = kThresholdSnapTolerance,
                                               double symmetry_tolerance = kThresholdSnapTolerance);

// Table files: {degree, lambda0, entries:[{lambda, matrix:[[[re,im],...],...]}]}.
nlohmann::json matrix_to_json(const CMatrix& m);
CMatrix matrix_from_json(const nlohmann::json& rows, const std::string& context);
nlohmann::json table_to_json(const TabulatedCondition& table);
TabulatedCondition table_from_json(const nlohmann::json& doc, const std::string& context);
TabulatedCondition load_table(const std::filesystem::path& path);
void save_table(const TabulatedCondition& table, const std::filesystem::path& path);

}  // namespace wgnet
