#pragma once

// Command-line front end: argument parsing, run configuration, CSV and JSON output.

#include <cstdio>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

namespace wgnet {

inline constexpr const char* kToolVersion = "1.0.0";

enum ExitCode : int { kExitOk = 0, kExitInput = 1, kExitUsage = 2, kExitNumerical = 3 };

struct RunConfig {
    std::string command;
    std::string command_line;  // as invoked, for the metadata header
    std::string input;         // graph or geometry file
    std::string output;        // empty: standard output
    double epsilon = 0.1;
    std::vector<double> lambdas;
    std::vector<double> eps_list;
    double lambda_min = -1.0;  // negative: lambda0
    double lambda_max = -1.0;  // negative: lambda1
    double h = 1.0 / 64.0;
    int modes = 8;
    int count = 5;
    int points_per_width = 10;
    std::vector<double> stubs;
    std::string source;        // edge:tau
    std::vector<std::string> targets;
    double singular_tolerance = 1e-8;
    double validation_tolerance = 0.0;  // 0: condition default
    double snap_tolerance = 1e-6;
    double resolution = 2000.0;
    int threads = 0;

    nlohmann::json to_json() const;
};

/// "a:b:n" (n points inclusive) or comma-separated values; strictly monotone.
std::vector<double> parse_grid(const std::string& text);

/// %.12e formatting.
std::string format_number(double x);

/// CSV writer with a '#' metadata block.
class CsvWriter {
public:
    CsvWriter(std::ostream& out, const RunConfig& config, const std::vector<std::string>& extra_meta = {});
    void header(const std::vector<std::string>& columns);
    void row(const std::vector<std::string>& cells);
    static std::string num(double x) { return format_number(x); }

private:
    std::ostream& out_;
};

int cmd_validate(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_spectrum(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_smatrix(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_green(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_threshold(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_junction(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_converge(const RunConfig& config, std::ostream& out, std::ostream& err);

/// Dispatches a configured command, mapping exceptions to exit codes.
int run_command(const RunConfig& config, std::ostream& out, std::ostream& err);

/// Full command line entry point.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace wgnet
