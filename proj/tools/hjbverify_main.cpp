#include "hjbverify/cli.hpp"
#include "hjbverify/types.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Grid HJB solver, controlled SDE simulator and optimality certificates"};
    app.require_subcommand(1);
    app.set_version_flag("--version", hjbv::kToolkitVersion);

    std::string config_path;
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed;
    int threads = 1;
    app.add_option("--config", config_path, "Configuration file (sectioned key = value)");
    app.add_option("--out", out_dir, "Output directory")->capture_default_str();
    app.add_option("--seed", seed, "Overrides mc.seed");
    app.add_option("--threads", threads, "Worker threads; results do not depend on it")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();

    auto* solve = app.add_subcommand("solve", "Solve the HJB equation on the configured grid");
    auto* simulate = app.add_subcommand("simulate", "Simulate the controlled SDE and estimate the cost");
    auto* verify = app.add_subcommand("verify", "Check the fundamental identity and certify the policy");
    auto* bench = app.add_subcommand("benchmark", "Emit closed-form benchmark tables");

    std::string bench_name;
    hjbv::BenchmarkArgs bargs;
    bench->add_option("name", bench_name, "Benchmark name (advertising)")->required();
    bench->add_option("--eta", bargs.eta)->capture_default_str();
    bench->add_option("--alpha", bargs.alpha)->capture_default_str();
    bench->add_option("--beta", bargs.beta)->capture_default_str();
    bench->add_option("--T", bargs.T)->capture_default_str();
    bench->add_option("--negative-branch", bargs.negative_branch, "x < 0 coefficient: linear | hjb_consistent")
        ->check(CLI::IsMember({"linear", "hjb_consistent"}))
        ->capture_default_str();
    bench->add_option("--times", bargs.times, "Times of the (x, v, dvdx, feedback) profiles")->delimiter(',');
    bench->add_option("--x-min", bargs.x_min)->capture_default_str();
    bench->add_option("--x-max", bargs.x_max)->capture_default_str();
    bench->add_option("--nx", bargs.nx)->capture_default_str();
    bench->add_option("--n-times", bargs.n_times, "Rows of the (t, a, b) table")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (bench->parsed()) {
            return hjbv::cmd_benchmark(bench_name, bargs, out_dir);
        }
        if (config_path.empty()) {
            throw hjbv::DomainError("--config is required for solve, simulate and verify");
        }
        hjbv::RunConfig config = hjbv::load_config(config_path);
        if (seed) {
            config.seed = *seed;
        }
        const hjbv::RunOptions options{threads};
        if (solve->parsed()) {
            return hjbv::cmd_solve(config, out_dir, options);
        }
        if (simulate->parsed()) {
            return hjbv::cmd_simulate(config, out_dir, options);
        }
        return hjbv::cmd_verify(config, out_dir, options);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
