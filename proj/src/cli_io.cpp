#include "wgnet/cli_io.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "wgnet/assembly.hpp"
#include "wgnet/continuum.hpp"
#include "wgnet/graph_model.hpp"
#include "wgnet/spectral.hpp"
#include "wgnet/threshold.hpp"

namespace wgnet {

using nlohmann::json;

json RunConfig::to_json() const {
    json j;
    j["command"] = command;
    j["input"] = input;
    j["output"] = output;
    j["epsilon"] = epsilon;
    j["lambdas"] = lambdas;
    j["eps_list"] = eps_list;
    j["lambda_min"] = lambda_min;
    j["lambda_max"] = lambda_max;
    j["h"] = h;
    j["modes"] = modes;
    j["count"] = count;
    j["points_per_width"] = points_per_width;
    j["stubs"] = stubs;
    j["source"] = source;
    j["targets"] = targets;
    j["singular_tolerance"] = singular_tolerance;
    j["validation_tolerance"] = validation_tolerance;
    j["snap_tolerance"] = snap_tolerance;
    j["resolution"] = resolution;
    return j;
}

std::vector<double> parse_grid(const std::string& text) {
    std::vector<double> out;
    auto to_double = [&](const std::string& s) {
        try {
            std::size_t pos = 0;
            const double v = std::stod(s, &pos);
            if (pos != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw UsageError("cannot parse number '" + s + "' in grid '" + text + "'");
        }
    };
    if (text.find(':') != std::string::npos) {
        std::vector<std::string> parts;
        std::stringstream ss(text);
        std::string p;
        while (std::getline(ss, p, ':')) parts.push_back(p);
        if (parts.size() != 3) throw UsageError("grid must be a:b:n");
        const double a = to_double(parts[0]), b = to_double(parts[1]);
        const int n = static_cast<int>(to_double(parts[2]));
        if (n < 1) throw UsageError("grid needs at least one point");
        for (int i = 0; i < n; ++i) out.push_back(n == 1 ? a : a + (b - a) * i / (n - 1));
    } else {
        std::stringstream ss(text);
        std::string p;
        while (std::getline(ss, p, ',')) out.push_back(to_double(p));
    }
    if (out.empty()) throw UsageError("grid is empty");
    for (std::size_t i = 2; i < out.size(); ++i)
        if ((out[i] - out[i - 1]) * (out[1] - out[0]) <= 0.0) throw UsageError("grid must be strictly monotone");
    if (out.size() == 2 && out[0] == out[1]) throw UsageError("grid must be strictly monotone");
    return out;
}

std::string format_number(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12e", x == 0.0 ? 0.0 : x);
    return buf;
}

CsvWriter::CsvWriter(std::ostream& out, const RunConfig& config, const std::vector<std::string>& extra)
    : out_(out) {
    out_ << "# wgnet " << kToolVersion << '\n';
    if (!config.command_line.empty()) out_ << "# command: " << config.command_line << '\n';
    out_ << "# config: " << config.to_json().dump() << '\n';
    out_ << "# tolerances: singular=" << format_number(config.singular_tolerance)
         << " validation="
         << (config.validation_tolerance > 0.0 ? format_number(config.validation_tolerance) : "auto")
         << " snap=" << format_number(config.snap_tolerance) << '\n';
    for (const auto& line : extra) out_ << "# " << line << '\n';
}

void CsvWriter::header(const std::vector<std::string>& columns) { row(columns); }

void CsvWriter::row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << '\n';
}

namespace {

// Output sink: file when configured, else the given stream.
class Sink {
public:
    Sink(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
        if (!path.empty()) {
            file_ = std::make_unique<std::ofstream>(path);
            if (!*file_) throw InputError("cannot open output file", path);
            stream_ = file_.get();
        }
    }
    std::ostream& get() { return *stream_; }

private:
    std::unique_ptr<std::ofstream> file_;
    std::ostream* stream_;
};

std::pair<int, double> parse_point(const MetricGraph& g, const std::string& text) {
    const auto colon = text.rfind(':');
    if (colon == std::string::npos) throw UsageError("point must be edge:t, got '" + text + "'");
    const int e = g.edge_index(text.substr(0, colon));
    try {
        return {e, std::stod(text.substr(colon + 1))};
    } catch (const std::exception&) {
        throw UsageError("cannot parse coordinate in '" + text + "'");
    }
}

std::vector<double> condition_samples(const MetricGraph& g, const VertexCondition& c) {
    if (c.is_tabulated()) {
        std::vector<double> s;
        for (double l : c.table().grid)
            if (l < g.lambda1()) s.push_back(l);
        return s;
    }
    std::vector<double> s;
    for (int i = 1; i <= 10; ++i) s.push_back(g.lambda0() + (g.lambda1() - g.lambda0()) * i / 11.0);
    for (int i = 1; i <= 5; ++i) s.push_back(g.lambda0() - i);
    return s;
}

}  // namespace

int cmd_validate(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    const MetricGraph g = load_graph(cfg.input);
    bool ok = true;
    out << "graph: " << g.edge_count() << " edges, " << g.lead_count() << " leads, "
        << g.junction_count() << " junctions\n";
    for (const auto& v : g.vertices()) {
        if (v.kind != VertexKind::Junction) continue;
        const auto samples = condition_samples(g, *v.condition);
        const auto r = validate_condition(*v.condition, samples, g.lambda0(), g.lambda1(),
                                          cfg.validation_tolerance);
        out << "vertex " << v.id << ": unitarity " << format_number(r.unitarity) << ", symmetry "
            << format_number(r.symmetry) << ", tolerance " << format_number(r.tolerance) << '\n';
        if (r.unitarity > r.tolerance || r.symmetry > r.tolerance) {
            err << "vertex " << v.id << ": scattering matrix is not unitary and symmetric\n";
            ok = false;
        }
        if (r.samples_below > 0 && (r.imaginary > r.tolerance || r.orthogonality > r.tolerance))
            out << "vertex " << v.id << ": warning: not real orthogonal below lambda0 (imaginary "
                << format_number(r.imaginary) << ", orthogonality " << format_number(r.orthogonality) << ")\n";
    }
    out << (ok ? "valid\n" : "invalid\n");
    return ok ? kExitOk : kExitInput;
}

int cmd_spectrum(const RunConfig& cfg, std::ostream& out, std::ostream&) {
    const MetricGraph g = load_graph(cfg.input);
    if (!g.bounded()) throw UsageError("graph has infinite edges; use smatrix");
    EigenOptions opt;
    opt.resolution = cfg.resolution;
    opt.tolerance = cfg.singular_tolerance;
    opt.threads = cfg.threads;
    const double lo = cfg.lambda_min < 0.0 ? g.lambda0() : cfg.lambda_min;
    const double hi = cfg.lambda_max < 0.0 ? g.lambda1() : cfg.lambda_max;
    const auto list = find_eigenvalues(g, cfg.epsilon, lo, hi, opt);
    Sink sink(cfg.output, out);
    CsvWriter csv(sink.get(), cfg,
                  {"interval: " + format_number(list.lambda_lo) + " " + format_number(list.lambda_hi)});
    csv.header({"lambda", "k", "multiplicity", "sigma_min"});
    for (const auto& e : list.values)
        csv.row({CsvWriter::num(e.lambda), CsvWriter::num(e.k), std::to_string(e.multiplicity),
                 CsvWriter::num(e.sigma_min)});
    return kExitOk;
}

int cmd_smatrix(const RunConfig& cfg, std::ostream& out, std::ostream&) {
    const MetricGraph g = load_graph(cfg.input);
    if (g.bounded()) throw UsageError("graph has no infinite edges; use spectrum");
    if (cfg.lambdas.empty()) throw UsageError("--lambda-grid is required");
    const int m = g.lead_count();
    Sink sink(cfg.output, out);
    CsvWriter csv(sink.get(), cfg);
    std::vector<std::string> cols{"lambda", "status"};
    for (int j = 0; j < m; ++j)
        for (int p = 0; p < m; ++p) {
            const std::string tag = g.edge(g.leads()[j]).id + "_" + g.edge(g.leads()[p]).id;
            cols.push_back("re_S_" + tag);
            cols.push_back("im_S_" + tag);
        }
    cols.insert(cols.end(), {"unitarity", "symmetry", "sigma_min"});
    csv.header(cols);
    std::vector<std::vector<std::string>> rows(cfg.lambdas.size());
    parallel_for(
        static_cast<int>(cfg.lambdas.size()),
        [&](int i) {
            const auto ctx = SpectralContext::at(g, cfg.lambdas[i], cfg.epsilon);
            std::vector<std::string> r{CsvWriter::num(cfg.lambdas[i])};
            const double smin = singularity_proximity(g, ctx);
            try {
                const auto S = network_smatrix(g, ctx);
                r.push_back("ok");
                for (int j = 0; j < m; ++j)
                    for (int p = 0; p < m; ++p) {
                        r.push_back(CsvWriter::num(S.S(j, p).real()));
                        r.push_back(CsvWriter::num(S.S(j, p).imag()));
                    }
                r.push_back(CsvWriter::num(S.unitarity));
                r.push_back(CsvWriter::num(S.symmetry));
            } catch (const SpectralPointError&) {
                r.push_back("spectral-point");
                for (int c = 0; c < 2 * m * m + 2; ++c) r.push_back("nan");
            }
            r.push_back(CsvWriter::num(smin));
            rows[i] = std::move(r);
        },
        cfg.threads);
    for (const auto& r : rows) csv.row(r);
    return kExitOk;
}

int cmd_green(const RunConfig& cfg, std::ostream& out, std::ostream&) {
    const MetricGraph g = load_graph(cfg.input);
    if (cfg.lambdas.size() != 1) throw UsageError("--lambda takes exactly one value");
    if (cfg.source.empty() || cfg.targets.empty()) throw UsageError("--source and --targets are required");
    const auto [se, tau] = parse_point(g, cfg.source);
    const auto ctx = SpectralContext::at(g, cfg.lambdas.front(), cfg.epsilon);
    const AmplitudeField f = green_solution(g, ctx, {se, tau});
    Sink sink(cfg.output, out);
    CsvWriter csv(sink.get(), cfg);
    csv.header({"edge", "t", "re_g", "im_g"});
    for (const auto& t : cfg.targets) {
        const auto [te, tt] = parse_point(g, t);
        const Edge& ed = g.edge(te);
        if (tt < 0.0 || tt > ed.length) throw UsageError("target outside edge " + ed.id);
        const cplx v = f.value(te, tt);
        csv.row({ed.id, CsvWriter::num(tt), CsvWriter::num(v.real()), CsvWriter::num(v.imag())});
    }
    return kExitOk;
}

int cmd_threshold(const RunConfig& cfg, std::ostream& out, std::ostream&) {
    const MetricGraph g = load_graph(cfg.input);
    const ThresholdProblem problem = make_threshold_problem(g, cfg.snap_tolerance);
    const auto cls = classify_limit(problem);
    ThresholdOptions opt;
    opt.resolution = cfg.resolution;
    opt.tolerance = cfg.singular_tolerance;
    opt.threads = cfg.threads;
    const auto limit = expand_multiplicity(limiting_eigenvalues(problem, cfg.count, opt), cfg.count);
    std::vector<std::string> meta{"classification: " + cls.label};
    for (const auto& j : cls.junctions)
        meta.push_back("junction " + j.vertex + ": " + to_string(j.classification) + ", k = " +
                       std::to_string(j.k) + " of d = " + std::to_string(j.degree));
    Sink sink(cfg.output, out);
    CsvWriter csv(sink.get(), cfg, meta);
    csv.header({"eps", "index", "mu_limit", "mu", "abs_error"});
    for (std::size_t j = 0; j < limit.size(); ++j)
        csv.row({CsvWriter::num(0.0), std::to_string(j + 1), CsvWriter::num(limit[j]),
                 CsvWriter::num(limit[j]), CsvWriter::num(0.0)});
    if (!cfg.eps_list.empty()) {
        const auto fam = eps_family(g, cfg.eps_list, cfg.count, opt);
        for (std::size_t i = 0; i < fam.epsilon.size(); ++i)
            for (std::size_t j = 0; j < fam.limit.size(); ++j)
                csv.row({CsvWriter::num(fam.epsilon[i]), std::to_string(j + 1), CsvWriter::num(fam.limit[j]),
                         CsvWriter::num(fam.mu(i, j)), CsvWriter::num(std::abs(fam.mu(i, j) - fam.limit[j]))});
    }
    return kExitOk;
}

int cmd_junction(const RunConfig& cfg, std::ostream& out, std::ostream&) {
    const JunctionGeometry geo = load_geometry(cfg.input);
    if (cfg.lambdas.empty()) throw UsageError("--lambda-grid is required");
    JunctionOptions opt;
    opt.modes = cfg.modes;
    const TabulatedCondition table = tabulate_junction(geo, cfg.lambdas, cfg.h, opt, cfg.threads);
    if (cfg.output.empty()) {
        out << table_to_json(table).dump(1) << '\n';
        return kExitOk;
    }
    save_table(table, cfg.output);
    CsvWriter csv(out, cfg, {"table: " + cfg.output});
    csv.header({"lambda", "unitarity", "asymmetry"});
    for (std::size_t i = 0; i < table.grid.size(); ++i)
        csv.row({CsvWriter::num(table.grid[i]), CsvWriter::num(table.unitarity_deviation[i]),
                 CsvWriter::num(table.asymmetry[i])});
    return kExitOk;
}

int cmd_converge(const RunConfig& cfg, std::ostream& out, std::ostream&) {
    const JunctionGeometry geo = load_geometry(cfg.input);
    if (cfg.eps_list.empty()) throw UsageError("--eps-list is required");
    std::vector<double> stubs = cfg.stubs;
    if (stubs.empty()) stubs.assign(geo.leads.size(), 1.0);
    ConvergenceOptions opt;
    opt.points_per_width = cfg.points_per_width;
    opt.count = cfg.count;
    opt.junction.modes = cfg.modes;
    opt.threads = cfg.threads;
    const auto study = convergence_study(geo, stubs, cfg.eps_list, opt);
    Sink sink(cfg.output, out);
    CsvWriter csv(sink.get(), cfg,
                  {"lambda0_h: " + format_number(study.lambda0), "lambda1_h: " + format_number(study.lambda1)});
    csv.header({"eps", "index", "lambda_2d", "lambda_graph", "abs_diff", "residual"});
    for (const auto& row : study.rows)
        for (std::size_t j = 0; j < row.pairs.size(); ++j) {
            const auto& p = row.pairs[j];
            csv.row({CsvWriter::num(row.epsilon), std::to_string(j + 1), CsvWriter::num(p.lambda_2d),
                     CsvWriter::num(p.lambda_graph), CsvWriter::num(p.distance), CsvWriter::num(p.residual)});
        }
    return kExitOk;
}

int run_command(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    try {
        if (cfg.command == "validate") return cmd_validate(cfg, out, err);
        if (cfg.command == "spectrum") return cmd_spectrum(cfg, out, err);
        if (cfg.command == "smatrix") return cmd_smatrix(cfg, out, err);
        if (cfg.command == "green") return cmd_green(cfg, out, err);
        if (cfg.command == "threshold") return cmd_threshold(cfg, out, err);
        if (cfg.command == "junction") return cmd_junction(cfg, out, err);
        if (cfg.command == "converge") return cmd_converge(cfg, out, err);
        err << "unknown command '" << cfg.command << "'\n";
        return kExitUsage;
    } catch (const InputError& e) {
        err << "input error: " << e.what() << '\n';
        return kExitInput;
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const SpectralPointError& e) {
        err << "numerical error: " << e.what() << " (sigma_min " << format_number(e.sigma_min()) << ")\n";
        return kExitNumerical;
    } catch (const NumericalError& e) {
        err << "numerical error: " << e.what() << '\n';
        return kExitNumerical;
    }
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Spectra, Green functions and scattering matrices of thin waveguide networks"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);
    RunConfig cfg;
    std::string lambda_grid, eps_list;
    int threads = 0;
    app.add_option("--threads", threads, "worker threads (default: WGNET_THREADS or hardware)");

    auto add_out = [&](CLI::App* c) { c->add_option("--out", cfg.output, "output file (default: stdout)"); };
    auto add_eps = [&](CLI::App* c) { c->add_option("--eps", cfg.epsilon, "channel width scale epsilon")->check(CLI::PositiveNumber); };
    auto add_tol = [&](CLI::App* c) {
        c->add_option("--tol", cfg.singular_tolerance, "relative singular-value tolerance")->check(CLI::PositiveNumber);
        c->add_option("--resolution", cfg.resolution, "scan points per unit k*length")->check(CLI::PositiveNumber);
    };

    auto* validate = app.add_subcommand("validate", "parse and validate a graph file");
    validate->add_option("graph", cfg.input)->required();
    validate->add_option("--validation-tol", cfg.validation_tolerance, "unitarity/symmetry tolerance");

    auto* spectrum = app.add_subcommand("spectrum", "eigenvalues of a bounded graph");
    spectrum->add_option("graph", cfg.input)->required();
    add_eps(spectrum);
    spectrum->add_option("--lmin", cfg.lambda_min, "interval start (default lambda0)");
    spectrum->add_option("--lmax", cfg.lambda_max, "interval end (default lambda1)");
    add_tol(spectrum);
    add_out(spectrum);

    auto* smatrix = app.add_subcommand("smatrix", "network scattering matrix of a graph with leads");
    smatrix->add_option("graph", cfg.input)->required();
    add_eps(smatrix);
    smatrix->add_option("--lambda-grid", lambda_grid, "a:b:n or comma list")->required();
    add_out(smatrix);

    auto* green = app.add_subcommand("green", "Green function values");
    green->add_option("graph", cfg.input)->required();
    add_eps(green);
    green->add_option("--lambda", lambda_grid, "spectral parameter")->required();
    green->add_option("--source", cfg.source, "edge:tau")->required();
    green->add_option("--targets", cfg.targets, "edge:t ...")->required();
    add_out(green);

    auto* threshold = app.add_subcommand("threshold", "limiting problem at the threshold");
    threshold->add_option("graph", cfg.input)->required();
    threshold->add_option("--count", cfg.count, "number of eigenvalues")->check(CLI::PositiveNumber);
    threshold->add_option("--eps-list", eps_list, "comma list of eps values");
    add_tol(threshold);
    threshold->add_option("--snap-tol", cfg.snap_tolerance, "threshold eigenvalue snap tolerance")->check(CLI::PositiveNumber);
    add_out(threshold);

    auto* junction = app.add_subcommand("junction", "tabulate a junction scattering matrix");
    junction->set_help_flag("--help", "print this help message and exit");
    junction->add_option("geometry", cfg.input)->required();
    junction->add_option("--lambda-grid", lambda_grid, "a:b:n or comma list")->required();
    junction->add_option("--h", cfg.h, "grid spacing")->check(CLI::PositiveNumber);
    junction->add_option("--modes", cfg.modes, "radiation modes per lead")->check(CLI::PositiveNumber);
    add_out(junction);

    auto* converge = app.add_subcommand("converge", "2D network eigenvalues against the graph model");
    converge->add_option("geometry", cfg.input)->required();
    converge->add_option("--eps-list", eps_list, "comma list of eps values")->required();
    converge->add_option("--stubs", cfg.stubs, "stub lengths per lead (default 1)");
    converge->add_option("--ppw", cfg.points_per_width, "grid points per channel width")->check(CLI::Range(10, 1000));
    converge->add_option("--count", cfg.count, "eigenvalues above lambda0 per eps")->check(CLI::PositiveNumber);
    converge->add_option("--modes", cfg.modes, "radiation modes per lead")->check(CLI::PositiveNumber);
    add_out(converge);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForVersion& e) {
        out << kToolVersion << '\n';
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << '\n';
        return kExitUsage;
    }
    cfg.command = app.get_subcommands().front()->get_name();
    cfg.threads = threads;
    cfg.command_line = "wgnet";
    for (int i = 1; i < argc; ++i) cfg.command_line += " " + std::string(argv[i]);
    if (cfg.command == "converge" && cfg.count == 5) cfg.count = 3;
    try {
        if (!lambda_grid.empty()) cfg.lambdas = parse_grid(lambda_grid);
        if (!eps_list.empty()) cfg.eps_list = parse_grid(eps_list);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return kExitUsage;
    }
    return run_command(cfg, out, err);
}

}  // namespace wgnet
