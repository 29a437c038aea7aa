#include "wgnet/continuum.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "wgnet/spectral.hpp"

namespace wgnet {

using nlohmann::json;

WallBC parse_wall(const std::string& name) {
    if (name == "dirichlet") return WallBC::Dirichlet;
    if (name == "neumann") return WallBC::Neumann;
    throw UsageError("unsupported wall condition '" + name + "'");
}

std::string to_string(WallBC wall) { return wall == WallBC::Dirichlet ? "dirichlet" : "neumann"; }

// ---------------------------------------------------------------------------
// transverse modes

double ModeBasis::phi(int n, double y) const {
    if (wall == WallBC::Dirichlet) return std::sqrt(2.0 / width) * std::sin((n + 1) * kPi * y / width);
    if (n == 0) return 1.0 / std::sqrt(width);
    return std::sqrt(2.0 / width) * std::cos(n * kPi * y / width);
}

cplx ModeBasis::longitudinal(int n, double lambda) const {
    return sqrt_upper(cplx(lambda - eigenvalues.at(n), 0.0));
}

ModeBasis transverse_modes(double width, WallBC wall, int count) {
    if (!(width > 0.0) || count < 1) throw UsageError("transverse modes need width > 0 and count >= 1");
    ModeBasis b;
    b.width = width;
    b.wall = wall;
    b.count = count;
    for (int n = 0; n < count; ++n) {
        const double m = wall == WallBC::Dirichlet ? n + 1 : n;
        b.eigenvalues.push_back(m * m * kPi * kPi / (width * width));
    }
    return b;
}

namespace {

int cells_across(double length, double h, const std::string& what) {
    const double r = length / h;
    const long n = std::lround(r);
    if (std::abs(r - n) > 1e-9 * std::max(1.0, std::abs(r)))
        throw InputError("grid spacing does not divide " + what);
    return static_cast<int>(n);
}

}  // namespace

ModeBasis discrete_transverse_modes(double width, WallBC wall, int count, double h) {
    ModeBasis b;
    b.width = width;
    b.wall = wall;
    b.h = h;
    const int n = cells_across(width, h, "the channel width");
    if (n < 2) throw UsageError("channel must be at least two cells wide");
    count = std::min(count, n);
    if (count < 1) throw UsageError("mode count must be positive");
    b.count = count;
    b.samples.resize(n, count);
    for (int m = 0; m < count; ++m) {
        const int q = wall == WallBC::Dirichlet ? m + 1 : m;
        const double s = std::sin(q * kPi / (2.0 * n));
        b.eigenvalues.push_back(4.0 / (h * h) * s * s);
        for (int j = 0; j < n; ++j) {
            const double arg = q * kPi * (j + 0.5) / n;
            b.samples(j, m) = wall == WallBC::Dirichlet ? std::sin(arg) : std::cos(arg);
        }
        b.samples.col(m) /= std::sqrt(h * b.samples.col(m).squaredNorm());
    }
    return b;
}

cplx discrete_multiplier(double lambda, double coefficient, double mu, double h) {
    const double beta = 1.0 - 0.5 * h * h * (lambda / coefficient - mu);
    if (std::abs(beta) < 1.0) return {beta, std::sqrt(1.0 - beta * beta)};
    if (beta >= 1.0) return beta - std::sqrt(beta * beta - 1.0);
    return beta + std::sqrt(beta * beta - 1.0);
}

std::pair<double, double> discrete_thresholds(double width, WallBC wall, double h,
                                              double coefficient) {
    const ModeBasis b = discrete_transverse_modes(width, wall, 2, h);
    return {coefficient * b.eigenvalues[0], coefficient * b.eigenvalues[1]};
}

// ---------------------------------------------------------------------------
// geometry

int JunctionGeometry::lead_index(const std::string& id) const {
    for (std::size_t i = 0; i < leads.size(); ++i)
        if (leads[i].id == id) return static_cast<int>(i);
    throw InputError("unknown lead", id);
}

JunctionGeometry scaled(const JunctionGeometry& g, double s) {
    JunctionGeometry out = g;
    for (auto& r : out.rectangles) r = {r.x0 * s, r.y0 * s, r.x1 * s, r.y1 * s};
    for (auto& l : out.leads) {
        l.mouth_x *= s;
        l.mouth_y *= s;
        l.width *= s;
        l.length *= s;
    }
    out.coefficient = g.coefficient * s * s;
    return out;
}

JunctionGeometry thin_network(const JunctionGeometry& reference, double eps,
                              const std::vector<double>& stub_lengths) {
    if (stub_lengths.size() != reference.leads.size())
        throw UsageError("one stub length per lead is required");
    JunctionGeometry out = scaled(reference, eps);
    for (std::size_t i = 0; i < out.leads.size(); ++i) {
        out.leads[i].length = stub_lengths[i];
        out.leads[i].truncated = false;
    }
    return out;
}

JunctionGeometry straight_geometry(double a, double lead_length, double width) {
    JunctionGeometry g;
    g.rectangles.push_back({0.0, 0.0, a, width});
    g.leads.push_back({"1", Axis::MinusX, 0.0, 0.0, width, lead_length, true});
    g.leads.push_back({"2", Axis::PlusX, a, 0.0, width, lead_length, true});
    return g;
}

JunctionGeometry tee_geometry(double lead_length) {
    JunctionGeometry g;
    g.rectangles.push_back({0.0, 0.0, 1.0, 1.0});
    g.leads.push_back({"1", Axis::MinusX, 0.0, 0.0, 1.0, lead_length, true});
    g.leads.push_back({"2", Axis::PlusY, 0.0, 1.0, 1.0, lead_length, true});
    g.leads.push_back({"3", Axis::MinusY, 0.0, 0.0, 1.0, lead_length, true});
    return g;
}

JunctionGeometry bend_geometry(double lead_length) {
    JunctionGeometry g;
    g.rectangles.push_back({0.0, 0.0, 1.0, 1.0});
    g.leads.push_back({"1", Axis::MinusX, 0.0, 0.0, 1.0, lead_length, true});
    g.leads.push_back({"2", Axis::PlusY, 0.0, 1.0, 1.0, lead_length, true});
    return g;
}

namespace {

Axis parse_axis(const std::string& s, const std::string& id) {
    if (s == "+x") return Axis::PlusX;
    if (s == "-x") return Axis::MinusX;
    if (s == "+y") return Axis::PlusY;
    if (s == "-y") return Axis::MinusY;
    throw InputError("axis must be one of +x, -x, +y, -y", id);
}

const char* axis_name(Axis a) {
    switch (a) {
        case Axis::PlusX: return "+x";
        case Axis::MinusX: return "-x";
        case Axis::PlusY: return "+y";
        case Axis::MinusY: return "-y";
    }
    return "+x";
}

}  // namespace

JunctionGeometry geometry_from_json(const json& doc) {
    if (!doc.is_object()) throw InputError("geometry must be an object");
    JunctionGeometry g;
    g.wall = parse_wall(doc.value("wall", std::string("dirichlet")));
    g.coefficient = doc.value("coefficient", 1.0);
    if (!doc.contains("rectangles") || !doc.at("rectangles").is_array() || doc.at("rectangles").empty())
        throw InputError("missing field 'rectangles'", "geometry");
    for (const auto& r : doc.at("rectangles")) {
        if (!r.is_array() || r.size() != 4) throw InputError("rectangle must be [x0, y0, x1, y1]", "geometry");
        Rect rc{r[0].get<double>(), r[1].get<double>(), r[2].get<double>(), r[3].get<double>()};
        if (!(rc.x1 > rc.x0 && rc.y1 > rc.y0)) throw InputError("rectangle has no area", "geometry");
        g.rectangles.push_back(rc);
    }
    if (!doc.contains("leads") || !doc.at("leads").is_array())
        throw InputError("missing field 'leads'", "geometry");
    for (const auto& l : doc.at("leads")) {
        LeadSpec s;
        s.id = l.value("id", std::to_string(g.leads.size() + 1));
        if (!l.contains("axis") || !l.contains("mouth")) throw InputError("lead needs 'axis' and 'mouth'", s.id);
        s.axis = parse_axis(l.at("axis").get<std::string>(), s.id);
        s.mouth_x = l.at("mouth").at(0).get<double>();
        s.mouth_y = l.at("mouth").at(1).get<double>();
        s.width = l.value("width", 1.0);
        if (l.contains("truncated")) {
            s.truncated = true;
            s.length = l.at("truncated").get<double>();
        } else if (l.contains("length")) {
            s.truncated = false;
            s.length = l.at("length").get<double>();
        } else {
            throw InputError("lead needs 'truncated' or 'length'", s.id);
        }
        if (!(s.width > 0.0) || !(s.length > 0.0)) throw InputError("lead width and length must be positive", s.id);
        g.leads.push_back(s);
    }
    return g;
}

json geometry_to_json(const JunctionGeometry& g) {
    json doc;
    doc["wall"] = to_string(g.wall);
    if (g.coefficient != 1.0) doc["coefficient"] = g.coefficient;
    json rects = json::array();
    for (const auto& r : g.rectangles) rects.push_back({r.x0, r.y0, r.x1, r.y1});
    doc["rectangles"] = rects;
    json leads = json::array();
    for (const auto& l : g.leads) {
        json j{{"id", l.id}, {"axis", axis_name(l.axis)}, {"mouth", {l.mouth_x, l.mouth_y}}, {"width", l.width}};
        j[l.truncated ? "truncated" : "length"] = l.length;
        leads.push_back(j);
    }
    doc["leads"] = leads;
    return doc;
}

JunctionGeometry load_geometry(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open geometry file", path.string());
    try {
        return geometry_from_json(json::parse(in));
    } catch (const json::exception& e) {
        throw InputError(std::string("geometry parse error: ") + e.what(), path.string());
    }
}

// ---------------------------------------------------------------------------
// grid

int Grid::cell_at(int i, int j) const {
    const int a = i - ix0, b = j - iy0;
    if (a < 0 || b < 0 || a >= nx || b >= ny) return -1;
    return index[static_cast<std::size_t>(b) * nx + a];
}

namespace {

struct LeadCells {
    int along0 = 0;  // index along the axis of layer 0
    int trans0 = 0;  // transverse index of q = 0
    int layers = 0;
    int width = 0;
};

// (i, j) of layer m, transverse q
std::pair<int, int> lead_cell(const LeadSpec& l, const LeadCells& c, int m, int q) {
    switch (l.axis) {
        case Axis::PlusX: return {c.along0 + m, c.trans0 + q};
        case Axis::MinusX: return {c.along0 - m, c.trans0 + q};
        case Axis::PlusY: return {c.trans0 + q, c.along0 + m};
        case Axis::MinusY: return {c.trans0 + q, c.along0 - m};
    }
    return {0, 0};
}

std::pair<int, int> outward(Axis a) {
    switch (a) {
        case Axis::PlusX: return {1, 0};
        case Axis::MinusX: return {-1, 0};
        case Axis::PlusY: return {0, 1};
        case Axis::MinusY: return {0, -1};
    }
    return {1, 0};
}

LeadCells lead_cells(const LeadSpec& l, double h) {
    LeadCells c;
    const bool xaxis = l.axis == Axis::PlusX || l.axis == Axis::MinusX;
    const int mx = cells_across(l.mouth_x, h, "lead " + l.id + " mouth");
    const int my = cells_across(l.mouth_y, h, "lead " + l.id + " mouth");
    c.width = cells_across(l.width, h, "lead " + l.id + " width");
    c.layers = cells_across(l.length, h, "lead " + l.id + " length");
    if (xaxis) {
        c.along0 = l.axis == Axis::PlusX ? mx : mx - 1;
        c.trans0 = my;
    } else {
        c.along0 = l.axis == Axis::PlusY ? my : my - 1;
        c.trans0 = mx;
    }
    return c;
}

}  // namespace

std::shared_ptr<const Grid> build_grid(const JunctionGeometry& g, double h) {
    if (!(h > 0.0)) throw UsageError("grid spacing must be positive");
    if (g.rectangles.empty()) throw InputError("geometry has no junction rectangles");
    struct Box {
        int i0, j0, i1, j1;
    };
    std::vector<Box> rects;
    int lo_i = INT32_MAX, lo_j = INT32_MAX, hi_i = INT32_MIN, hi_j = INT32_MIN;
    auto extend = [&](int i, int j) {
        lo_i = std::min(lo_i, i);
        lo_j = std::min(lo_j, j);
        hi_i = std::max(hi_i, i);
        hi_j = std::max(hi_j, j);
    };
    for (const auto& r : g.rectangles) {
        Box b{cells_across(r.x0, h, "a junction corner"), cells_across(r.y0, h, "a junction corner"),
              cells_across(r.x1, h, "a junction corner"), cells_across(r.y1, h, "a junction corner")};
        rects.push_back(b);
        extend(b.i0, b.j0);
        extend(b.i1 - 1, b.j1 - 1);
    }
    std::vector<LeadCells> lc;
    for (const auto& l : g.leads) {
        if (l.truncated && l.length < 2.0 * l.width - 1e-12)
            throw InputError("truncation length must be at least twice the width", l.id);
        lc.push_back(lead_cells(l, h));
        const auto& c = lc.back();
        const auto a = lead_cell(l, c, 0, 0);
        const auto b = lead_cell(l, c, c.layers - 1, c.width - 1);
        extend(a.first, a.second);
        extend(b.first, b.second);
    }
    auto grid = std::make_shared<Grid>();
    grid->h = h;
    grid->ix0 = lo_i;
    grid->iy0 = lo_j;
    grid->nx = hi_i - lo_i + 1;
    grid->ny = hi_j - lo_j + 1;
    // owner: -2 outside, -1 junction, >= 0 lead
    std::vector<int> owner(static_cast<std::size_t>(grid->nx) * grid->ny, -2);
    auto at = [&](int i, int j) -> int& {
        return owner[static_cast<std::size_t>(j - lo_j) * grid->nx + (i - lo_i)];
    };
    for (const auto& b : rects)
        for (int j = b.j0; j < b.j1; ++j)
            for (int i = b.i0; i < b.i1; ++i) at(i, j) = -1;
    for (std::size_t L = 0; L < g.leads.size(); ++L) {
        const auto& l = g.leads[L];
        const auto& c = lc[L];
        for (int q = 0; q < c.width; ++q) {
            const auto in = lead_cell(l, c, -1, q);
            const bool inside = in.first >= lo_i && in.second >= lo_j && in.first <= hi_i &&
                                in.second <= hi_j && at(in.first, in.second) == -1;
            if (!inside) throw InputError("lead mouth is not on the junction boundary", l.id);
            for (int m = 0; m < c.layers; ++m) {
                const auto p = lead_cell(l, c, m, q);
                if (at(p.first, p.second) != -2) throw InputError("lead overlaps the domain", l.id);
                at(p.first, p.second) = static_cast<int>(L);
            }
        }
    }
    grid->index.assign(owner.size(), -1);
    for (int j = lo_j; j <= hi_j; ++j)
        for (int i = lo_i; i <= hi_i; ++i)
            if (at(i, j) != -2) {
                grid->index[static_cast<std::size_t>(j - lo_j) * grid->nx + (i - lo_i)] = grid->size();
                grid->cells.emplace_back(i, j);
            }
    grid->lead_layers.resize(g.leads.size());
    for (std::size_t L = 0; L < g.leads.size(); ++L) {
        const auto& c = lc[L];
        auto& layers = grid->lead_layers[L];
        layers.assign(c.layers, std::vector<int>(c.width));
        for (int m = 0; m < c.layers; ++m)
            for (int q = 0; q < c.width; ++q) {
                const auto p = lead_cell(g.leads[L], c, m, q);
                layers[m][q] = grid->cell_at(p.first, p.second);
            }
    }
    return grid;
}

// ---------------------------------------------------------------------------
// scattering

namespace {

template <class Scalar>
void add_laplacian(const JunctionGeometry& g, const Grid& grid,
                   std::vector<Eigen::Triplet<Scalar>>& trip, std::vector<int>& open_faces) {
    // open_faces marks cells whose boundary face is a truncation face (handled by the caller)
    const double c = g.coefficient / (grid.h * grid.h);
    std::vector<std::pair<int, std::pair<int, int>>> truncation;  // cell -> outward direction
    std::vector<int> trunc_dir(grid.size(), -1);
    for (std::size_t L = 0; L < g.leads.size(); ++L) {
        if (!g.leads[L].truncated) continue;
        for (int cell : grid.lead_layers[L].back()) trunc_dir[cell] = static_cast<int>(L);
    }
    open_faces = trunc_dir;
    const int dirs[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
    for (int r = 0; r < grid.size(); ++r) {
        const auto [i, j] = grid.cells[r];
        double diag = 4.0 * c;
        for (const auto& d : dirs) {
            const int nb = grid.cell_at(i + d[0], j + d[1]);
            if (nb >= 0) {
                trip.emplace_back(r, nb, Scalar(-c));
                continue;
            }
            if (trunc_dir[r] >= 0) {
                const auto o = outward(g.leads[trunc_dir[r]].axis);
                if (o.first == d[0] && o.second == d[1]) continue;  // radiation face
            }
            diag += g.wall == WallBC::Dirichlet ? c : -c;
        }
        trip.emplace_back(r, r, Scalar(diag));
    }
}

}  // namespace

JunctionResult junction_smatrix(const JunctionGeometry& g, double lambda, double h,
                                const JunctionOptions& options) {
    const int nlead = static_cast<int>(g.leads.size());
    if (nlead < 1) throw InputError("junction has no leads");
    for (const auto& l : g.leads) {
        if (!l.truncated) throw UsageError("scattering needs truncated leads; lead " + l.id + " is closed");
        if (std::abs(l.width - g.leads[0].width) > 1e-12)
            throw InputError("all leads must share one width", l.id);
    }
    const double w = g.leads[0].width;
    const double cf = g.coefficient;
    const ModeBasis modes = discrete_transverse_modes(w, g.wall, std::max(2, options.modes), h);
    const int nm = std::min(options.modes, modes.count);
    JunctionResult res;
    res.lambda = lambda;
    res.h = h;
    res.lambda0_h = cf * modes.eigenvalues[0];
    res.lambda1_h = cf * modes.eigenvalues[1];
    if (!(lambda > res.lambda0_h && lambda < res.lambda1_h))
        throw UsageError("lambda must lie strictly between the discrete thresholds");

    std::vector<cplx> rho(nm);
    for (int n = 0; n < nm; ++n) rho[n] = discrete_multiplier(lambda, cf, modes.eigenvalues[n], h);
    const double phase = std::arg(rho[0]);
    res.wavenumber = phase / h;
    if (2.0 * kPi / phase < options.min_points_per_wavelength)
        throw UsageError("insufficient resolution: fewer than " +
                         std::to_string(options.min_points_per_wavelength) + " points per wavelength");

    const auto grid = build_grid(g, h);
    const int n = grid->size();
    std::vector<Eigen::Triplet<cplx>> trip;
    std::vector<int> trunc;
    add_laplacian<cplx>(g, *grid, trip, trunc);
    const double c = cf / (h * h);
    for (int r = 0; r < n; ++r) trip.emplace_back(r, r, cplx(-lambda));
    const int width = modes.samples.rows();
    const RMatrix& phi = modes.samples;
    for (int L = 0; L < nlead; ++L) {
        const auto& last = grid->lead_layers[L].back();
        for (int q = 0; q < width; ++q) {
            trip.emplace_back(last[q], last[q], cplx(-c));
            for (int q2 = 0; q2 < width; ++q2) {
                cplx s = 0.0;
                for (int m = 0; m < nm; ++m) s += phi(q, m) * (rho[m] - 1.0) * h * phi(q2, m);
                trip.emplace_back(last[q], last[q2], -c * s);
            }
        }
    }
    Eigen::SparseMatrix<cplx> A(n, n);
    A.setFromTriplets(trip.begin(), trip.end());
    A.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<cplx>, Eigen::COLAMDOrdering<int>> lu;
    lu.compute(A);
    if (lu.info() != Eigen::Success) throw NumericalError("sparse factorization failed: " + lu.lastErrorMessage());

    CMatrix rhs = CMatrix::Zero(n, nlead);
    for (int p = 0; p < nlead; ++p) {
        const int M = static_cast<int>(grid->lead_layers[p].size());
        const cplx inc = std::pow(rho[0], -(M + 0.5)) - std::pow(rho[0], -(M - 1.5));
        const auto& last = grid->lead_layers[p].back();
        for (int q = 0; q < width; ++q) rhs(last[q], p) += c * phi(q, 0) * inc;
    }
    const CMatrix u = lu.solve(rhs);
    if (lu.info() != Eigen::Success) throw NumericalError("sparse solve failed");

    res.T.resize(nlead, nlead);
    res.evanescent.assign(nlead, 0.0);
    const cplx rho_half = std::sqrt(rho[0]);
    for (int p = 0; p < nlead; ++p) {
        for (int j = 0; j < nlead; ++j) {
            const auto& first = grid->lead_layers[j].front();
            cplx c0 = 0.0;
            for (int q = 0; q < width; ++q) c0 += h * phi(q, 0) * u(first[q], p);
            if (j == p) c0 -= 1.0 / rho_half;
            res.T(j, p) = c0 / rho_half;
            const auto& last = grid->lead_layers[j].back();
            for (int m = 1; m < nm; ++m) {
                cplx cm = 0.0;
                for (int q = 0; q < width; ++q) cm += h * phi(q, m) * u(last[q], p);
                res.evanescent[p] = std::max(res.evanescent[p], std::abs(cm));
            }
        }
        if (options.keep_fields) {
            DiscreteField f;
            f.grid = grid;
            f.values = u.col(p);
            f.incident_lead = p;
            f.lambda = lambda;
            f.coefficient = cf;
            f.lead_modes.assign(nlead, modes);
            res.fields.push_back(std::move(f));
        }
    }
    res.unitarity = unitarity_deviation(res.T);
    res.symmetry = symmetry_deviation(res.T);
    return res;
}

TabulatedCondition tabulate_junction(const JunctionGeometry& g, const std::vector<double>& lambdas,
                                     double h, const JunctionOptions& options, int threads) {
    if (lambdas.empty()) throw UsageError("lambda grid is empty");
    for (std::size_t i = 1; i < lambdas.size(); ++i)
        if (!(lambdas[i] > lambdas[i - 1])) throw UsageError("lambda grid must be strictly increasing");
    std::vector<JunctionResult> results(lambdas.size());
    JunctionOptions opt = options;
    opt.keep_fields = false;
    parallel_for(
        static_cast<int>(lambdas.size()),
        [&](int i) { results[i] = junction_smatrix(g, lambdas[i], h, opt); }, threads);
    TabulatedCondition t;
    t.degree = static_cast<int>(g.leads.size());
    t.lambda0 = results.front().lambda0_h;
    t.spacing = h;
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        const CMatrix& T = results[i].T;
        t.grid.push_back(lambdas[i]);
        t.matrices.push_back(0.5 * (T + T.transpose()));
        t.unitarity_deviation.push_back(results[i].unitarity);
        t.asymmetry.push_back(results[i].symmetry);
    }
    return t;
}

ScalingReport scaling_invariance_check(const JunctionGeometry& g, double lambda, double s,
                                       double h, bool scale_grid, const JunctionOptions& options) {
    if (!(s > 0.0)) throw UsageError("scale must be positive");
    ScalingReport r;
    r.reference = junction_smatrix(g, lambda, h, options).T;
    r.scaled = junction_smatrix(scaled(g, s), lambda, scale_grid ? s * h : h, options).T;
    r.deviation = (r.reference - r.scaled).cwiseAbs().maxCoeff();
    return r;
}

ModalProfile mode0_profile(const DiscreteField& field, int lead) {
    if (!field.grid || lead < 0 || lead >= static_cast<int>(field.grid->lead_layers.size()))
        throw UsageError("unknown lead " + std::to_string(lead));
    const auto& layers = field.grid->lead_layers[lead];
    const ModeBasis& modes = field.lead_modes.at(lead);
    const double h = field.grid->h;
    ModalProfile p;
    for (std::size_t m = 0; m < layers.size(); ++m) {
        cplx c0 = 0.0;
        for (std::size_t q = 0; q < layers[m].size(); ++q)
            c0 += h * modes.samples(q, 0) * field.values(layers[m][q]);
        double r2 = 0.0;
        for (std::size_t q = 0; q < layers[m].size(); ++q)
            r2 += h * std::norm(field.values(layers[m][q]) - c0 * modes.samples(q, 0));
        p.t.push_back((m + 0.5) * h);
        p.c0.push_back(c0);
        p.residual.push_back(std::sqrt(r2));
    }
    return p;
}

// ---------------------------------------------------------------------------
// bounded eigenvalues

namespace {

struct Locked {
    double lambda;
    RVector x;
};

}  // namespace

Eigen2DResult network_eigenvalues_2d(const JunctionGeometry& g, double h, int count,
                                     const Eigen2DOptions& options) {
    if (count < 1) throw UsageError("eigenvalue count must be positive");
    if (g.leads.empty()) throw InputError("network geometry has no channels");
    for (const auto& l : g.leads)
        if (l.truncated) throw UsageError("network eigenvalues need closed channels; lead " + l.id + " is truncated");
    const double lambda0 = discrete_thresholds(g.leads[0].width, g.wall, h, g.coefficient).first;
    const double lower = options.lower_fraction * lambda0;

    const auto grid = build_grid(g, h);
    const int n = grid->size();
    std::vector<Eigen::Triplet<double>> trip;
    std::vector<int> unused;
    add_laplacian<double>(g, *grid, trip, unused);
    Eigen::SparseMatrix<double> A(n, n);
    A.setFromTriplets(trip.begin(), trip.end());
    A.makeCompressed();
    Eigen::SparseMatrix<double> I(n, n);
    I.setIdentity();

    Eigen2DResult out;
    std::vector<Locked> locked;
    std::mt19937_64 rng(12345);
    std::normal_distribution<double> normal;
    double sigma = lower;
    double complete_hi = lower;
    auto found_below = [&](double hi) {
        return static_cast<int>(std::count_if(locked.begin(), locked.end(), [&](const Locked& l) {
            return l.lambda >= lower && l.lambda <= hi;
        }));
    };
    const int max_steps = std::min(options.max_lanczos, n);
    while (found_below(complete_hi) < count) {
        if (out.shifts >= options.max_shifts)
            throw NumericalError("shift-invert sweep did not converge after " + std::to_string(out.shifts) +
                                 " shifts (" + std::to_string(out.iterations) + " iterations)");
        ++out.shifts;
        Eigen::SparseMatrix<double> S = A - sigma * I;
        Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
        lu.compute(S);
        if (lu.info() != Eigen::Success) throw NumericalError("sparse factorization failed at a shift");

        auto deflate = [&](RVector& v) {
            for (const auto& l : locked) v -= l.x.dot(v) * l.x;
        };
        RMatrix V(n, max_steps + 1);
        std::vector<double> alpha, beta;
        RVector v(n);
        for (int i = 0; i < n; ++i) v(i) = normal(rng);
        deflate(v);
        V.col(0) = v / v.norm();
        std::vector<std::pair<double, RVector>> accepted;
        int need = count - found_below(complete_hi);
        double radius = 0.0;
        bool done = false;
        for (int j = 0; j < max_steps && !done; ++j) {
            RVector wv = lu.solve(RVector(V.col(j)));
            ++out.iterations;
            const double a = V.col(j).dot(wv);
            alpha.push_back(a);
            for (int pass = 0; pass < 2; ++pass) {
                deflate(wv);
                wv -= V.leftCols(j + 1) * (V.leftCols(j + 1).transpose() * wv);
            }
            const double b = wv.norm();
            const bool exhausted = b < 1e-14 * std::abs(a) || j + 1 == max_steps;
            if (!exhausted) {
                beta.push_back(b);
                V.col(j + 1) = wv / b;
            }
            if ((j + 1) % 10 != 0 && !exhausted) continue;
            const int m = j + 1;
            RMatrix Tm = RMatrix::Zero(m, m);
            for (int i = 0; i < m; ++i) {
                Tm(i, i) = alpha[i];
                if (i + 1 < m) Tm(i, i + 1) = Tm(i + 1, i) = beta[i];
            }
            Eigen::SelfAdjointEigenSolver<RMatrix> es(Tm);
            std::vector<int> order(m);
            for (int i = 0; i < m; ++i) order[i] = i;
            std::sort(order.begin(), order.end(), [&](int x, int y) {
                return std::abs(es.eigenvalues()(x)) > std::abs(es.eigenvalues()(y));
            });
            accepted.clear();
            radius = 0.0;
            for (int idx : order) {
                const double theta = es.eigenvalues()(idx);
                if (theta == 0.0) break;
                const double lam = sigma + 1.0 / theta;
                RVector x = V.leftCols(m) * es.eigenvectors().col(idx);
                x.normalize();
                const double resid = (A * x - lam * x).norm();
                if (resid > options.tolerance * std::abs(lam)) break;
                accepted.emplace_back(lam, std::move(x));
                radius = std::max(radius, std::abs(lam - sigma));
            }
            int new_above = 0;
            for (const auto& a2 : accepted)
                if (a2.first >= lower) ++new_above;
            if (new_above > need || exhausted) done = true;
        }
        if (accepted.empty()) throw NumericalError("no Ritz pair converged at shift " + std::to_string(sigma));
        for (auto& a2 : accepted) locked.push_back({a2.first, std::move(a2.second)});
        complete_hi = std::max(complete_hi, sigma + radius);
        sigma += 0.999 * radius;
    }
    std::sort(locked.begin(), locked.end(), [](const Locked& a, const Locked& b) { return a.lambda < b.lambda; });
    for (const auto& l : locked) {
        if (l.lambda < lower || l.lambda > complete_hi) continue;
        if (static_cast<int>(out.values.size()) == count) break;
        out.values.push_back({l.lambda, (A * l.x - l.lambda * l.x).norm()});
    }
    return out;
}

// ---------------------------------------------------------------------------
// thin-network convergence

JunctionGeometry straight_channel(double eps, double length) {
    JunctionGeometry g;
    g.rectangles.push_back({0.0, 0.0, eps, eps});
    g.leads.push_back({"1", Axis::PlusX, eps, 0.0, eps, length - eps, false});
    g.coefficient = eps * eps;
    return g;
}

MetricGraph network_graph(const TabulatedCondition& table, double lambda1,
                          const std::vector<double>& stub_lengths) {
    if (static_cast<int>(stub_lengths.size()) != table.degree)
        throw UsageError("one stub length per junction channel is required");
    std::vector<Vertex> vertices;
    std::vector<Edge> edges;
    Vertex j;
    j.id = "J";
    j.kind = VertexKind::Junction;
    j.condition = VertexCondition::tabulated(table);
    vertices.push_back(j);
    for (int i = 0; i < table.degree; ++i) {
        Vertex end;
        end.id = "end" + std::to_string(i + 1);
        end.kind = VertexKind::FreeEnd;
        end.bc = FreeEndBC::dirichlet();
        end.order = {i};
        vertices.push_back(end);
        edges.push_back({"e" + std::to_string(i + 1), 0, i + 1, stub_lengths[i]});
        vertices[0].order.push_back(i);
    }
    return MetricGraph(table.lambda0, lambda1, std::move(vertices), std::move(edges));
}

ConvergenceStudy convergence_study(const JunctionGeometry& reference,
                                   const std::vector<double>& stub_lengths,
                                   const std::vector<double>& eps_list,
                                   const ConvergenceOptions& options) {
    if (eps_list.empty()) throw UsageError("eps list is empty");
    if (options.points_per_width < 10) throw UsageError("at least 10 points per width are required");
    const double w = reference.leads.at(0).width;
    const double h_ref = w / options.points_per_width;
    const auto [l0, l1] = discrete_thresholds(w, reference.wall, h_ref, reference.coefficient);
    ConvergenceStudy study;
    study.lambda0 = l0;
    study.lambda1 = l1;

    const double eps_max = *std::max_element(eps_list.begin(), eps_list.end());
    const double l_min = *std::min_element(stub_lengths.begin(), stub_lengths.end());
    const double delta = kBranchExclusion * (l1 - l0);
    const double q_lo = std::sqrt(0.5 * delta);
    const double q_hi = std::min(eps_max * (options.count + 2) * kPi / l_min, 0.9 * std::sqrt(l1 - l0));
    std::vector<double> grid;
    const int nodes = std::max(2, options.table_nodes);
    for (int i = 0; i < nodes; ++i) {
        const double q = q_lo + (q_hi - q_lo) * i / (nodes - 1);
        grid.push_back(l0 + q * q);
    }
    study.table = tabulate_junction(reference, grid, h_ref, options.junction, options.threads);
    study.table.lambda0 = l0;
    const MetricGraph graph = network_graph(study.table, l1, stub_lengths);

    for (double eps : eps_list) {
        ConvergenceRow row;
        row.epsilon = eps;
        const auto spectrum = find_eigenvalues(graph, eps, l0, grid.back());
        for (const auto& e : spectrum.values) row.graph_spectrum.push_back(e.lambda);
        const JunctionGeometry net = thin_network(reference, eps, stub_lengths);
        const double h = eps * h_ref;
        int want = options.count + 2;
        for (;;) {
            const auto res = network_eigenvalues_2d(net, h, want);
            row.pairs.clear();
            row.below_threshold.clear();
            for (const auto& v : res.values) {
                if (v.lambda < l0) {
                    row.below_threshold.push_back(v.lambda);
                    continue;
                }
                if (static_cast<int>(row.pairs.size()) == options.count) break;
                ConvergencePair p;
                p.lambda_2d = v.lambda;
                p.residual = v.residual;
                p.distance = kInf;
                for (double g : row.graph_spectrum)
                    if (std::abs(g - v.lambda) < p.distance) {
                        p.distance = std::abs(g - v.lambda);
                        p.lambda_graph = g;
                    }
                row.pairs.push_back(p);
            }
            if (static_cast<int>(row.pairs.size()) == options.count) break;
            if (want > options.count + 40)
                throw NumericalError("too many 2D eigenvalues below lambda0");
            want += 4;
        }
        study.rows.push_back(std::move(row));
    }
    return study;
}

}  // namespace wgnet
