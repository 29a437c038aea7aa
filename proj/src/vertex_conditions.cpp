#include "wgnet/vertex_conditions.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace wgnet {

using nlohmann::json;

VertexCondition VertexCondition::kirchhoff(int degree) {
    if (degree < 2) throw InputError("Kirchhoff condition requires degree >= 2");
    return VertexCondition(KirchhoffCondition{degree});
}

VertexCondition VertexCondition::constant(CMatrix matrix) {
    if (matrix.rows() != matrix.cols() || matrix.rows() < 1)
        throw InputError("scattering matrix must be square and non-empty");
    return VertexCondition(ConstantCondition{std::move(matrix)});
}

VertexCondition VertexCondition::tabulated(TabulatedCondition table, std::string source_path) {
    if (table.grid.empty() || table.grid.size() != table.matrices.size())
        throw InputError("table needs one matrix per grid point", source_path);
    for (std::size_t i = 1; i < table.grid.size(); ++i)
        if (!(table.grid[i] > table.grid[i - 1]))
            throw InputError("table lambda values must be strictly increasing", source_path);
    for (const auto& m : table.matrices)
        if (m.rows() != table.degree || m.cols() != table.degree)
            throw InputError("table matrix size differs from declared degree", source_path);
    return VertexCondition(std::move(table), std::move(source_path));
}

int VertexCondition::degree() const {
    return std::visit(
        [](const auto& c) -> int {
            using T = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<T, KirchhoffCondition>) return c.degree;
            else if constexpr (std::is_same_v<T, ConstantCondition>) return static_cast<int>(c.matrix.rows());
            else return c.degree;
        },
        *data_);
}

RMatrix kirchhoff_matrix(int degree) {
    if (degree < 2) throw InputError("Kirchhoff matrix requires degree >= 2");
    const double d = degree;
    RMatrix t = RMatrix::Constant(degree, degree, 2.0 / d);
    t.diagonal().array() -= 1.0;
    return t;
}

namespace {

CMatrix interpolate(const TabulatedCondition& table, double lambda) {
    const auto& g = table.grid;
    const double slack = 1e-12 * std::max(1.0, std::abs(g.back()));
    if (lambda < g.front() - slack || lambda > g.back() + slack) {
        std::ostringstream os;
        os << "lambda " << lambda << " outside tabulated range [" << g.front() << ", " << g.back()
           << "]";
        throw UsageError(os.str());
    }
    if (lambda <= g.front()) return table.matrices.front();
    if (lambda >= g.back()) return table.matrices.back();
    auto it = std::upper_bound(g.begin(), g.end(), lambda);
    const std::size_t hi = static_cast<std::size_t>(it - g.begin());
    const std::size_t lo = hi - 1;
    const double w = (lambda - g[lo]) / (g[hi] - g[lo]);
    if (w == 0.0) return table.matrices[lo];
    const CMatrix& a = table.matrices[lo];
    const CMatrix& b = table.matrices[hi];
    CMatrix t = (1.0 - w) * a + w * b;
    // between unitary nodes, retract onto the unitary group (polar factor keeps symmetry)
    if (unitarity_deviation(a) <= kTabulatedTolerance && unitarity_deviation(b) <= kTabulatedTolerance) {
        Eigen::JacobiSVD<CMatrix> svd(t, Eigen::ComputeFullU | Eigen::ComputeFullV);
        t = svd.matrixU() * svd.matrixV().adjoint();
    }
    return t;
}

}  // namespace

CMatrix evaluate(const VertexCondition& condition, double lambda, double lambda1) {
    if (lambda >= lambda1) throw UsageError("vertex condition evaluated at lambda >= lambda1");
    return std::visit(
        [&](const auto& c) -> CMatrix {
            using T = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<T, KirchhoffCondition>)
                return kirchhoff_matrix(c.degree).template cast<cplx>();
            else if constexpr (std::is_same_v<T, ConstantCondition>) return c.matrix;
            else return interpolate(c, lambda);
        },
        condition.data());
}

CMatrix evaluate(const VertexCondition& condition, cplx lambda, double lambda1) {
    if (lambda.imag() == 0.0) return evaluate(condition, lambda.real(), lambda1);
    if (condition.is_tabulated())
        throw UsageError("tabulated vertex condition cannot be evaluated at complex lambda");
    return evaluate(condition, lambda.real(), kInf);
}

double unitarity_deviation(const CMatrix& t) {
    return operator_norm(t * t.adjoint() - CMatrix::Identity(t.rows(), t.cols()));
}

double symmetry_deviation(const CMatrix& t) { return operator_norm(t - t.transpose()); }

double orthogonality_deviation(const CMatrix& t) {
    return operator_norm(t * t.transpose() - CMatrix::Identity(t.rows(), t.cols()));
}

ValidationReport validate_condition(const VertexCondition& condition,
                                    std::span<const double> lambda_samples, double lambda0,
                                    double lambda1, double tolerance) {
    ValidationReport r;
    r.tolerance = tolerance > 0.0 ? tolerance : condition.default_tolerance();
    for (double lambda : lambda_samples) {
        const CMatrix t = evaluate(condition, lambda, lambda1);
        if (lambda > lambda0) {
            r.unitarity = std::max(r.unitarity, unitarity_deviation(t));
            r.symmetry = std::max(r.symmetry, symmetry_deviation(t));
            ++r.samples_above;
        } else if (lambda < lambda0) {
            r.imaginary = std::max(r.imaginary, operator_norm(t.imag().cast<cplx>()));
            r.orthogonality = std::max(r.orthogonality, orthogonality_deviation(t));
            ++r.samples_below;
        }
    }
    r.pass = r.unitarity <= r.tolerance && r.symmetry <= r.tolerance &&
             r.imaginary <= r.tolerance && r.orthogonality <= r.tolerance;
    return r;
}

std::string to_string(ThresholdClass c) {
    switch (c) {
        case ThresholdClass::Dirichlet: return "dirichlet";
        case ThresholdClass::Kirchhoff: return "kirchhoff";
        case ThresholdClass::Mixed: return "mixed";
    }
    return "mixed";
}

CMatrix threshold_matrix(const VertexCondition& condition, double lambda0) {
    if (!condition.is_tabulated()) return evaluate(condition, lambda0);
    const auto& table = condition.table();
    const double slack = 1e-12 * std::max(1.0, std::abs(lambda0));
    if (std::abs(table.grid.front() - lambda0) <= slack) return table.matrices.front();
    if (table.grid.front() < lambda0) return interpolate(table, lambda0);
    if (!table.allow_threshold_extrapolation || table.grid.size() < 2)
        throw UsageError("table does not reach lambda0 and threshold extrapolation is disabled");
    // T is analytic in sqrt(lambda - lambda0) near the threshold.
    const double q1 = std::sqrt(table.grid[0] - lambda0);
    const double q2 = std::sqrt(table.grid[1] - lambda0);
    return (q2 * table.matrices[0] - q1 * table.matrices[1]) / (q2 - q1);
}

ThresholdDecomposition threshold_decomposition(const CMatrix& t, double snap_tolerance,
                                               double symmetry_tolerance) {
    const int d = static_cast<int>(t.rows());
    if (t.cols() != d || d < 1) throw InputError("threshold matrix must be square");
    const double asym = symmetry_deviation(t);
    if (asym > symmetry_tolerance) {
        std::ostringstream os;
        os << "T(lambda0) is not symmetric (deviation " << asym << ")";
        throw InputError(os.str());
    }
    const RMatrix re = t.real();
    const RMatrix sym = 0.5 * (re + re.transpose());
    Eigen::SelfAdjointEigenSolver<RMatrix> es(sym);
    const RVector& ev = es.eigenvalues();
    const RMatrix& vecs = es.eigenvectors();

    ThresholdDecomposition out;
    out.degree = d;
    std::vector<int> minus, plus;
    for (int i = 0; i < d; ++i) {
        const double dm = std::abs(ev(i) + 1.0);
        const double dp = std::abs(ev(i) - 1.0);
        const double dist = std::min(dm, dp);
        if (dist > snap_tolerance) {
            std::ostringstream os;
            os << "eigenvalue " << ev(i) << " of T(lambda0) is not within " << snap_tolerance
               << " of +-1";
            throw InputError(os.str());
        }
        out.max_snap = std::max(out.max_snap, dist);
        (dm < dp ? minus : plus).push_back(i);
    }
    out.k = static_cast<int>(minus.size());
    out.minus_basis.resize(d, out.k);
    out.plus_basis.resize(d, d - out.k);
    for (int j = 0; j < out.k; ++j) out.minus_basis.col(j) = vecs.col(minus[j]);
    for (int j = 0; j < d - out.k; ++j) out.plus_basis.col(j) = vecs.col(plus[j]);
    out.P = out.minus_basis * out.minus_basis.transpose();
    out.P_perp = out.plus_basis * out.plus_basis.transpose();

    if (out.k == d) {
        out.classification = ThresholdClass::Dirichlet;
    } else if (out.k == d - 1) {
        RVector v = out.plus_basis.col(0);
        if (v(0) < 0) v = -v;
        const double c = 1.0 / std::sqrt(static_cast<double>(d));
        const bool constant = ((v.array() - c).abs() <= snap_tolerance).all();
        out.classification = constant ? ThresholdClass::Kirchhoff : ThresholdClass::Mixed;
    } else {
        out.classification = ThresholdClass::Mixed;
    }
    return out;
}

ThresholdDecomposition threshold_decomposition(const VertexCondition& condition, double lambda0,
                                               double snap_tolerance,
                                               double symmetry_tolerance) {
    return threshold_decomposition(threshold_matrix(condition, lambda0), snap_tolerance,
                                   symmetry_tolerance);
}

// ---------------------------------------------------------------------------
// serialization

json matrix_to_json(const CMatrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            row.push_back(json::array({m(i, j).real(), m(i, j).imag()}));
        rows.push_back(std::move(row));
    }
    return rows;
}

CMatrix matrix_from_json(const json& rows, const std::string& context) {
    if (!rows.is_array() || rows.empty()) throw InputError("matrix must be a non-empty array of rows", context);
    const std::size_t n = rows.size();
    CMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& row = rows[i];
        if (!row.is_array() || row.size() != n) throw InputError("matrix must be square", context);
        for (std::size_t j = 0; j < n; ++j) {
            const auto& e = row[j];
            if (e.is_number()) {
                m(i, j) = cplx(e.get<double>(), 0.0);
            } else if (e.is_array() && e.size() == 2 && e[0].is_number() && e[1].is_number()) {
                m(i, j) = cplx(e[0].get<double>(), e[1].get<double>());
            } else {
                throw InputError("matrix entries must be [re, im] pairs", context);
            }
        }
    }
    return m;
}

json table_to_json(const TabulatedCondition& table) {
    json doc;
    doc["degree"] = table.degree;
    doc["lambda0"] = table.lambda0;
    if (table.spacing > 0.0) doc["spacing"] = table.spacing;
    if (table.allow_threshold_extrapolation) doc["extrapolate_threshold"] = true;
    json entries = json::array();
    for (std::size_t i = 0; i < table.grid.size(); ++i) {
        json e;
        e["lambda"] = table.grid[i];
        e["matrix"] = matrix_to_json(table.matrices[i]);
        if (i < table.unitarity_deviation.size()) e["unitarity_deviation"] = table.unitarity_deviation[i];
        if (i < table.asymmetry.size()) e["asymmetry"] = table.asymmetry[i];
        entries.push_back(std::move(e));
    }
    doc["entries"] = std::move(entries);
    return doc;
}

TabulatedCondition table_from_json(const json& doc, const std::string& context) {
    if (!doc.is_object()) throw InputError("table must be an object", context);
    for (const char* key : {"degree", "lambda0", "entries"})
        if (!doc.contains(key)) throw InputError(std::string("table is missing '") + key + "'", context);
    TabulatedCondition t;
    t.degree = doc.at("degree").get<int>();
    t.lambda0 = doc.at("lambda0").get<double>();
    t.spacing = doc.value("spacing", 0.0);
    t.allow_threshold_extrapolation = doc.value("extrapolate_threshold", false);
    const auto& entries = doc.at("entries");
    if (!entries.is_array() || entries.empty()) throw InputError("table has no entries", context);
    bool have_u = true, have_a = true;
    for (const auto& e : entries) {
        if (!e.contains("lambda") || !e.contains("matrix"))
            throw InputError("table entry needs 'lambda' and 'matrix'", context);
        t.grid.push_back(e.at("lambda").get<double>());
        CMatrix m = matrix_from_json(e.at("matrix"), context);
        if (m.rows() != t.degree) throw InputError("table matrix size differs from degree", context);
        t.matrices.push_back(std::move(m));
        have_u = have_u && e.contains("unitarity_deviation");
        have_a = have_a && e.contains("asymmetry");
        if (have_u) t.unitarity_deviation.push_back(e.at("unitarity_deviation").get<double>());
        if (have_a) t.asymmetry.push_back(e.at("asymmetry").get<double>());
    }
    if (!have_u) t.unitarity_deviation.clear();
    if (!have_a) t.asymmetry.clear();
    for (std::size_t i = 1; i < t.grid.size(); ++i)
        if (!(t.grid[i] > t.grid[i - 1]))
            throw InputError("table lambda values must be strictly increasing", context);
    return t;
}

TabulatedCondition load_table(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open table file", path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw InputError(std::string("table parse error: ") + e.what(), path.string());
    }
    return table_from_json(doc, path.string());
}

void save_table(const TabulatedCondition& table, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write table file", path.string());
    out << table_to_json(table).dump(1) << '\n';
}

}  // namespace wgnet
