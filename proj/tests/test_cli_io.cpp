#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <unistd.h>
#include <sstream>

#include "wgnet/cli_io.hpp"
#include "wgnet/continuum.hpp"
#include "wgnet/vertex_conditions.hpp"

using namespace wgnet;
namespace fs = std::filesystem;

namespace {

const char* kStar = R"({
  "lambda0": 9.869604401089358, "lambda1": 39.47841760435743,
  "vertices": [
    {"id": "J", "kind": "junction", "condition": "kirchhoff", "order": ["e1", "e2", "e3"]},
    {"id": "v1", "kind": "free-end", "bc": "dirichlet"},
    {"id": "v2", "kind": "free-end", "bc": "dirichlet"},
    {"id": "v3", "kind": "free-end", "bc": "dirichlet"}
  ],
  "edges": [
    {"id": "e1", "start": "J", "end": "v1", "length": 1},
    {"id": "e2", "start": "J", "end": "v2", "length": 1},
    {"id": "e3", "start": "J", "end": "v3", "length": 1}
  ]})";

const char* kSpider = R"({
  "lambda0": 9.869604401089358, "lambda1": 39.47841760435743,
  "vertices": [{"id": "J", "kind": "junction", "condition": "kirchhoff"}],
  "edges": [{"id": "a", "start": "J", "length": "inf"},
            {"id": "b", "start": "J", "length": "inf"},
            {"id": "c", "start": "J", "length": "inf"}]})";

const char* kEdge = R"({
  "lambda0": 9.869604401089358, "lambda1": 39.47841760435743,
  "vertices": [{"id": "a", "kind": "free-end", "bc": "dirichlet"},
               {"id": "b", "kind": "free-end", "bc": "dirichlet"}],
  "edges": [{"id": "e", "start": "a", "end": "b", "length": 1}]})";

struct Scratch {
    fs::path dir;
    Scratch() {
        dir = fs::temp_directory_path() / ("wgnet_cli_" + std::to_string(::getpid()));
        fs::create_directories(dir);
    }
    ~Scratch() { fs::remove_all(dir); }
    std::string write(const std::string& name, const std::string& text) const {
        std::ofstream(dir / name) << text;
        return (dir / name).string();
    }
};

struct Run {
    int status;
    std::string out, err;
};

Run run(std::vector<std::string> args) {
    args.insert(args.begin(), "wgnet");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int status = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {status, out.str(), err.str()};
}

std::vector<std::vector<std::string>> data_rows(const std::string& csv) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(csv);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string c;
        while (std::getline(ss, c, ',')) cells.push_back(c);
        rows.push_back(cells);
    }
    return rows;
}

}  // namespace

TEST_CASE("grids and number formatting") {
    CHECK(parse_grid("1:2:3") == std::vector<double>{1.0, 1.5, 2.0});
    CHECK(parse_grid("0.2,0.1,0.05") == std::vector<double>{0.2, 0.1, 0.05});
    CHECK_THROWS_AS(parse_grid("1,3,2"), UsageError);
    CHECK_THROWS_AS(parse_grid("1:2"), UsageError);
    CHECK_THROWS_AS(parse_grid("x"), UsageError);
    CHECK(format_number(1.0) == "1.000000000000e+00");
    CHECK(format_number(-0.0) == "0.000000000000e+00");
}

TEST_CASE("validate: status codes and messages") {
    Scratch s;
    CHECK(run({"validate", s.write("star.json", kStar)}).status == kExitOk);
    nlohmann::json bad = nlohmann::json::parse(kStar);
    bad["vertices"][0]["condition"] = {{"matrix", nlohmann::json::parse("[[[1,0],[0,0]],[[0,0],[1,0]]]")}};
    const Run mismatch = run({"validate", s.write("bad.json", bad.dump())});
    CHECK(mismatch.status == kExitInput);
    CHECK(mismatch.err.find("J") != std::string::npos);
    bad = nlohmann::json::parse(kStar);
    bad.erase("lambda0");
    const Run missing = run({"validate", s.write("missing.json", bad.dump())});
    CHECK(missing.status == kExitInput);
    CHECK(missing.err.find("lambda0") != std::string::npos);
    CHECK(run({"validate", (s.dir / "nope.json").string()}).status == kExitInput);
    CHECK(run({"frobnicate"}).status == kExitUsage);
}

TEST_CASE("spectrum: rows, empty intervals and unbounded graphs") {
    Scratch s;
    const Run r = run({"spectrum", s.write("edge.json", kEdge), "--eps", "0.1", "--lmax", "10.8"});
    REQUIRE(r.status == kExitOk);
    const auto rows = data_rows(r.out);
    REQUIRE(rows.size() == 4);
    CHECK(rows[0] == std::vector<std::string>{"lambda", "k", "multiplicity", "sigma_min"});
    for (int m = 1; m <= 3; ++m)
        CHECK(std::stod(rows[m][0]) == doctest::Approx(kPi * kPi + 0.01 * kPi * kPi * m * m).epsilon(1e-11));
    CHECK(r.out.find("# wgnet 1.0.0") == 0);
    CHECK(r.out.find("# command: wgnet spectrum") != std::string::npos);

    const Run empty = run({"spectrum", s.write("edge2.json", kEdge), "--eps", "0.1", "--lmin", "10.0", "--lmax", "10.01"});
    CHECK(empty.status == kExitOk);
    CHECK(data_rows(empty.out).size() == 1);

    const Run unbounded = run({"spectrum", s.write("spider.json", kSpider)});
    CHECK(unbounded.status == kExitUsage);
    CHECK(unbounded.err.find("use smatrix") != std::string::npos);

    CHECK(run({"spectrum", s.write("edge3.json", kEdge), "--lmin", "1.0"}).status == kExitUsage);
}

TEST_CASE("output is deterministic and written to --out") {
    Scratch s;
    const std::string g = s.write("star.json", kStar);
    const std::string out = (s.dir / "a.csv").string();
    auto slurp = [&] {
        std::ifstream in(out);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    CHECK(run({"spectrum", g, "--eps", "0.2", "--out", out}).status == kExitOk);
    const std::string first = slurp();
    CHECK(run({"spectrum", g, "--eps", "0.2", "--out", out}).status == kExitOk);
    CHECK_FALSE(first.empty());
    CHECK(first == slurp());
    // the worker count is not part of the result
    CHECK(run({"--threads", "3", "spectrum", g, "--eps", "0.2", "--out", out}).status == kExitOk);
    auto body = [](const std::string& t) { return t.substr(t.find("# config")); };
    CHECK(body(first) == body(slurp()));
}

TEST_CASE("smatrix on a Kirchhoff spider reproduces T") {
    Scratch s;
    const Run r = run({"smatrix", s.write("spider.json", kSpider), "--lambda-grid", "12:30:4"});
    REQUIRE(r.status == kExitOk);
    const auto rows = data_rows(r.out);
    REQUIRE(rows.size() == 5);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        CHECK(rows[i][1] == "ok");
        CHECK(std::stod(rows[i][2]) == doctest::Approx(-1.0 / 3.0).epsilon(1e-13));
        CHECK(std::stod(rows[i][4]) == doctest::Approx(2.0 / 3.0).epsilon(1e-13));
        CHECK(std::stod(rows[i][20]) <= 1e-10);
    }
}

TEST_CASE("smatrix flags spectral points instead of dropping them") {
    // a Dirichlet pendant edge of length 1 carries embedded eigenvalues at k = m pi
    const char* doc = R"({
      "lambda0": 9.869604401089358, "lambda1": 39.47841760435743,
      "vertices": [{"id": "J", "kind": "junction", "condition": {"matrix": [[[-1,0],[0,0]],[[0,0],[1,0]]]}},
                   {"id": "f", "kind": "free-end", "bc": "dirichlet"}],
      "edges": [{"id": "p", "start": "J", "end": "f", "length": 1},
                {"id": "l", "start": "J", "length": "inf"}]})";
    Scratch s;
    const double lambda = kPi * kPi + 0.01 * kPi * kPi;
    char grid[64];
    std::snprintf(grid, sizeof grid, "11.0,%.17g", lambda);
    const Run r = run({"smatrix", s.write("pendant.json", doc), "--lambda-grid", grid, "--eps", "0.1"});
    REQUIRE(r.status == kExitOk);
    const auto rows = data_rows(r.out);
    REQUIRE(rows.size() == 3);
    CHECK(rows[1][1] == "ok");
    CHECK(rows[2][1] == "spectral-point");
}

TEST_CASE("green and threshold commands") {
    Scratch s;
    const Run g = run({"green", s.write("spider.json", kSpider), "--lambda", "15", "--source", "a:0.3",
                       "--targets", "a:0.1", "b:0.5"});
    REQUIRE(g.status == kExitOk);
    CHECK(data_rows(g.out).size() == 3);
    CHECK(run({"green", s.write("spider2.json", kSpider), "--lambda", "15", "--source", "z:0.3", "--targets", "a:1"})
              .status == kExitInput);

    const Run t = run({"threshold", s.write("star.json", kStar), "--count", "4"});
    REQUIRE(t.status == kExitOk);
    CHECK(t.out.find("Kirchhoff problem") != std::string::npos);
    const auto rows = data_rows(t.out);
    REQUIRE(rows.size() == 5);
    CHECK(std::stod(rows[1][2]) == doctest::Approx(kPi * kPi / 4).epsilon(1e-11));
    CHECK(std::stod(rows[2][2]) == doctest::Approx(kPi * kPi).epsilon(1e-11));
    CHECK(std::stod(rows[3][2]) == doctest::Approx(kPi * kPi).epsilon(1e-11));
}

TEST_CASE("junction command writes a loadable table") {
    Scratch s;
    const std::string geo = s.write("bend.json", geometry_to_json(bend_geometry()).dump());
    const std::string table = (s.dir / "t.json").string();
    const Run r = run({"junction", geo, "--lambda-grid", "12:30:3", "--h", "0.0625", "--out", table});
    REQUIRE(r.status == kExitOk);
    const TabulatedCondition t = load_table(table);
    CHECK(t.degree == 2);
    CHECK(t.grid.size() == 3);
    CHECK(t.spacing == 0.0625);
    for (const auto& m : t.matrices) CHECK(unitarity_deviation(m) < 1e-10);
    CHECK(data_rows(r.out).size() == 4);
    CHECK(run({"junction", geo, "--lambda-grid", "1:2:2", "--h", "0.0625"}).status == kExitUsage);
}
