#pragma once

// Finite-difference Helmholtz solver on planar waveguide junctions built from axis-aligned
// rectangles. Cell-centred 5-point grid; walls by ghost reflection; truncated leads closed
// by the exact discrete modal radiation condition for the first N modes.

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "wgnet/common.hpp"
#include "wgnet/graph_model.hpp"
#include "wgnet/vertex_conditions.hpp"

namespace wgnet {

enum class WallBC { Dirichlet, Neumann };
WallBC parse_wall(const std::string& name);
std::string to_string(WallBC wall);

/// Transverse modes of -d^2/dy^2 on (0, width). With h > 0 the modes are those of the
/// 3-point operator on `width / h` cells with ghost walls, orthonormal in the h-weighted sum.
struct ModeBasis {
    double width = 1.0;
    WallBC wall = WallBC::Dirichlet;
    int count = 0;
    double h = 0.0;                   // 0 for the continuum basis
    std::vector<double> eigenvalues;  // ascending
    RMatrix samples;                  // discrete: cells x count

    /// Continuum eigenfunction, unit L2 norm.
    double phi(int n, double y) const;
    /// Longitudinal wavenumber sqrt(lambda - lambda_n), Im >= 0.
    cplx longitudinal(int n, double lambda) const;
};

ModeBasis transverse_modes(double width, WallBC wall, int count);
ModeBasis discrete_transverse_modes(double width, WallBC wall, int count, double h);

/// Root rho of rho + 1/rho = 2 - h^2 (lambda / c - mu): |rho| = 1 with Im rho > 0 when
/// propagating, |rho| < 1 otherwise.
cplx discrete_multiplier(double lambda, double coefficient, double mu, double h);

enum class Axis { PlusX, MinusX, PlusY, MinusY };

struct Rect {
    double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
};

struct LeadSpec {
    std::string id;
    Axis axis = Axis::PlusX;
    double mouth_x = 0.0;  // mouth segment end with the smaller transverse coordinate
    double mouth_y = 0.0;
    double width = 1.0;
    double length = 2.0;   // truncation length (truncated) or stub length (closed by a wall)
    bool truncated = true;
};

struct JunctionGeometry {
    std::vector<Rect> rectangles;
    std::vector<LeadSpec> leads;
    WallBC wall = WallBC::Dirichlet;
    double coefficient = 1.0;  // operator -coefficient * Laplacian

    int lead_index(const std::string& id) const;
};

/// Geometry scaled by s with operator -s^2 Laplacian (lead lengths scaled too).
JunctionGeometry scaled(const JunctionGeometry& g, double s);
/// Bounded thin network: junction and widths scaled by eps, leads replaced by stubs of the
/// given absolute lengths closed by walls, operator -eps^2 Laplacian.
JunctionGeometry thin_network(const JunctionGeometry& reference, double eps,
                              const std::vector<double>& stub_lengths);

JunctionGeometry straight_geometry(double a, double lead_length = 2.0, double width = 1.0);
/// Unit-square junction; lead 1 along -x, lead 2 along +y, lead 3 along -y.
JunctionGeometry tee_geometry(double lead_length = 2.0);
/// Unit-square junction; lead 1 along -x, lead 2 along +y.
JunctionGeometry bend_geometry(double lead_length = 2.0);

JunctionGeometry geometry_from_json(const nlohmann::json& doc);
nlohmann::json geometry_to_json(const JunctionGeometry& g);
JunctionGeometry load_geometry(const std::filesystem::path& path);

/// Cell layout of a geometry at spacing h.
struct Grid {
    double h = 0.0;
    int nx = 0, ny = 0;       // bounding box in cells
    int ix0 = 0, iy0 = 0;     // index of the box's lower-left cell
    std::vector<int> index;   // nx * ny, -1 outside the domain
    std::vector<std::pair<int, int>> cells;
    std::vector<std::vector<std::vector<int>>> lead_layers;  // [lead][layer][transverse]

    int cell_at(int i, int j) const;
    int size() const { return static_cast<int>(cells.size()); }
};

std::shared_ptr<const Grid> build_grid(const JunctionGeometry& g, double h);

struct DiscreteField {
    std::shared_ptr<const Grid> grid;
    CVector values;
    int incident_lead = -1;
    double lambda = 0.0;
    double coefficient = 1.0;
    std::vector<ModeBasis> lead_modes;  // discrete modes per lead
};

struct JunctionOptions {
    int modes = 8;
    bool keep_fields = false;
    double min_points_per_wavelength = 12.0;
};

struct JunctionResult {
    CMatrix T;                       // T(j, p): mouth-referenced mode-0 amplitude on lead j, incidence on p
    double lambda = 0.0;
    double h = 0.0;
    double lambda0_h = 0.0;          // discrete thresholds of the lead cross-section
    double lambda1_h = 0.0;
    double wavenumber = 0.0;         // discrete mode-0 longitudinal wavenumber
    double unitarity = 0.0;
    double symmetry = 0.0;
    std::vector<double> evanescent;  // per incident lead: largest |c_n|, n >= 1, on truncation faces
    std::vector<DiscreteField> fields;
};

JunctionResult junction_smatrix(const JunctionGeometry& g, double lambda, double h,
                                const JunctionOptions& options = {});

/// Discrete thresholds (lambda0^h, lambda1^h) of a lead of the given width at spacing h.
std::pair<double, double> discrete_thresholds(double width, WallBC wall, double h,
                                              double coefficient = 1.0);

/// Tabulates T on the grid; matrices are symmetrized and per-node diagnostics recorded.
TabulatedCondition tabulate_junction(const JunctionGeometry& g, const std::vector<double>& lambdas,
                                     double h, const JunctionOptions& options = {},
                                     int threads = 0);

struct ScalingReport {
    CMatrix reference;
    CMatrix scaled;
    double deviation = 0.0;  // max entrywise |difference|
};

/// Compares T of `g` at spacing h with T of the s-scaled geometry at spacing s*h (scale_grid)
/// or at the unscaled spacing h.
ScalingReport scaling_invariance_check(const JunctionGeometry& g, double lambda, double s,
                                       double h, bool scale_grid,
                                       const JunctionOptions& options = {});

struct ModalProfile {
    std::vector<double> t;  // cross-section positions (layer centres)
    std::vector<cplx> c0;
    std::vector<double> residual;  // h-weighted L2 norm of u - c0 phi0 on the section
};

ModalProfile mode0_profile(const DiscreteField& field, int lead);

struct Eigen2D {
    double lambda = 0.0;
    double residual = 0.0;  // ||(A - lambda) x|| for unit x
};

struct Eigen2DOptions {
    double lower_fraction = 0.5;  // eigenvalues above lower_fraction * lambda0
    int max_lanczos = 600;
    double tolerance = 1e-10;     // relative residual
    int max_shifts = 50;
};

struct Eigen2DResult {
    std::vector<Eigen2D> values;
    int shifts = 0;
    int iterations = 0;
};

/// Smallest eigenvalues of the discrete operator on a bounded geometry (no truncated leads)
/// above lower_fraction * lambda0, with lambda0 the first transverse eigenvalue of its leads.
Eigen2DResult network_eigenvalues_2d(const JunctionGeometry& g, double h, int count,
                                     const Eigen2DOptions& options = {});

/// Graph model of a thin network: one junction carrying `table`, one edge per lead of the
/// given length ending in a Dirichlet free end. Thresholds are the discrete ones of the table.
MetricGraph network_graph(const TabulatedCondition& table, double lambda1,
                          const std::vector<double>& stub_lengths);

struct ConvergenceOptions {
    int points_per_width = 10;  // h = eps / points_per_width on the network, 1 / points_per_width on the junction
    int count = 3;              // eigenvalues above lambda0 compared per eps
    int table_nodes = 400;      // q-uniform nodes of the reference table
    JunctionOptions junction;
    int threads = 0;
};

struct ConvergencePair {
    double lambda_2d = 0.0;
    double residual = 0.0;
    double lambda_graph = 0.0;  // nearest point of the graph spectrum
    double distance = 0.0;
};

struct ConvergenceRow {
    double epsilon = 0.0;
    std::vector<ConvergencePair> pairs;  // first `count` 2D eigenvalues above lambda0
    std::vector<double> below_threshold; // 2D eigenvalues in [lambda0 / 2, lambda0)
    std::vector<double> graph_spectrum;
};

struct ConvergenceStudy {
    double lambda0 = 0.0;
    double lambda1 = 0.0;
    TabulatedCondition table;
    std::vector<ConvergenceRow> rows;
};

/// Compares 2D eigenvalues of the thin network with the graph model's spectrum for each eps.
/// `reference` is the junction at unit width with truncated leads.
ConvergenceStudy convergence_study(const JunctionGeometry& reference,
                                   const std::vector<double>& stub_lengths,
                                   const std::vector<double>& eps_list,
                                   const ConvergenceOptions& options = {});

/// Straight channel [0, length] x [0, eps] as a junction square plus one closed stub.
JunctionGeometry straight_channel(double eps, double length);

}  // namespace wgnet
