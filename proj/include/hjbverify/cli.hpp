#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace hjbv {

inline constexpr const char* kToolkitVersion = "hjbverify 0.1.0";

/// Flat sectioned key = value configuration. Every key has a default; the
/// resolved configuration is echoed into each output directory.
struct RunConfig {
    // [problem]
    std::string kind = "advertising"; // advertising | exit_demo | discounted_constant
    double eta = 0.5;
    double alpha = 1.0;
    double beta = 0.5;
    double T = 1.0;
    std::string negative_branch = "linear"; // advertising x < 0 coefficient: linear | hjb_consistent
    std::string demo = "expected_exit_time"; // exit_demo: constant | expected_exit_time
    double cost = 1.0;                       // discounted_constant
    double rate = 1.0;                       // discounted_constant

    // [grid]
    double x_min = 0.1;
    double x_max = 5.0;
    int nx = 401;
    int nt = 1000;
    int ladder_levels = 0; // 0 disables the refinement ladder

    // [mc]
    int paths = 100000;
    double dt = 1e-3;
    std::uint64_t seed = 1;
    std::string exit_rule = "grid_crossing"; // grid_crossing | brownian_bridge
    int path_stride = 10;
    int csv_paths = 20;

    // [verify]
    std::string policy = "feedback"; // feedback | zero | constant:<value>
    std::string field = "closed_form"; // closed_form | solved | csv:<path>
    std::optional<double> tolerance;   // unset: 3 SE + c_dx dx + c_dt sqrt(dt)
    double c_dx = 1.0;
    double c_dt = 1.0;
    double t0 = 0.0;
    double x0 = 2.0;
    double truncation_T1 = 20.0;
    bool necessity = false;
    bool control_variate = true; // subtract the Ito term from each path's defect sample
};

/// Parses the configuration text; errors cite the source, line and key.
RunConfig parse_config(std::istream& is, const std::string& source = "config");
RunConfig load_config(const std::filesystem::path& path);
/// Canonical text of a resolved configuration; parse_config(echo(c)) == c.
std::string echo_config(const RunConfig& config);

struct RunOptions {
    int threads = 1;
};

struct BenchmarkArgs {
    double eta = 0.5;
    double alpha = 1.0;
    double beta = 0.5;
    double T = 1.0;
    std::string negative_branch = "linear";
    std::vector<double> times{0.0, 0.5, 1.0};
    double x_min = -2.0;
    double x_max = 2.0;
    int nx = 81;
    int n_times = 101;
};

/// Exit status: 0 when every gated check passes, 1 otherwise (failures are
/// listed in the JSON sidecar and on stderr). Errors propagate as exceptions.
int cmd_solve(const RunConfig& config, const std::filesystem::path& out_dir, const RunOptions& options = {});
int cmd_simulate(const RunConfig& config, const std::filesystem::path& out_dir, const RunOptions& options = {});
int cmd_verify(const RunConfig& config, const std::filesystem::path& out_dir, const RunOptions& options = {});
int cmd_benchmark(const std::string& name, const BenchmarkArgs& args, const std::filesystem::path& out_dir);

} // namespace hjbv
