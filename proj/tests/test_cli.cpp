#include "hjbverify/cli.hpp"
#include "hjbverify/types.hpp"

#include <doctest.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace hjbv;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("hjbverify_test_cli_" + name);
    fs::remove_all(p);
    return p;
}

std::string parse_error(const std::string& text) {
    std::istringstream in(text);
    try {
        parse_config(in, "cfg.ini");
    } catch (const DomainError& e) {
        return e.what();
    }
    return "";
}

RunConfig small_advertising() {
    RunConfig c;
    c.paths = 1500;
    c.dt = 1e-2;
    c.nx = 101;
    c.nt = 100;
    return c;
}

} // namespace

TEST_CASE("config errors cite the line and key") {
    const std::string bad_value = parse_error("[problem]\n# comment\neta = abc\n");
    CHECK(bad_value.find("cfg.ini:3") != std::string::npos);
    CHECK(bad_value.find("eta") != std::string::npos);
    CHECK(parse_error("[problem]\nzeta = 1\n").find("unknown key 'zeta'") != std::string::npos);
    CHECK(parse_error("[nowhere]\n").find("unknown section") != std::string::npos);
    CHECK(parse_error("[mc]\npaths = 10\npaths = 20\n").find("cfg.ini:3: duplicate key 'paths'") != std::string::npos);
    CHECK(parse_error("eta = 1\n").find("before any section") != std::string::npos);
    CHECK(parse_error("[mc]\npaths = 1.5\n").find("paths") != std::string::npos);
    CHECK(parse_error("[verify]\npolicy = sometimes\n").find("policy") != std::string::npos);
    CHECK(parse_error("[grid]\nnx = nan\n").find("nx") != std::string::npos);
    CHECK(parse_error("[problem]\nkind = advertising\n").empty());
}

TEST_CASE("config echo is a fixed point") {
    RunConfig c;
    c.kind = "exit_demo";
    c.tolerance = 0.125;
    c.policy = "constant:0.3";
    c.dt = 1e-3 / 3.0;
    c.necessity = true;
    const std::string text = echo_config(c);
    std::istringstream in(text);
    const RunConfig back = parse_config(in);
    CHECK(echo_config(back) == text);
    CHECK(back.dt == c.dt);
    CHECK(back.tolerance == c.tolerance);
    std::istringstream defaults(echo_config(RunConfig{}));
    CHECK(echo_config(parse_config(defaults)) == echo_config(RunConfig{}));
    CHECK(text.find("tolerance = 0.125") != std::string::npos);
}

TEST_CASE("verify exit status follows the verdict") {
    const RunConfig good = small_advertising();
    const fs::path a = scratch("verify_ok");
    CHECK(cmd_verify(good, a) == 0);
    CHECK(fs::exists(a / "report.md"));
    CHECK(fs::exists(a / "config.ini"));
    const auto j = nlohmann::json::parse(slurp(a / "report.json"));
    CHECK(j["certificate"]["verdict"] == "optimal_within_tolerance");
    const std::string md = slurp(a / "report.md");
    for (const char* heading : {"## Hypotheses", "## Field diagnostics", "## Identity table", "## Certificate verdict"}) {
        CHECK(md.find(heading) != std::string::npos);
    }

    RunConfig zero_tol = good;
    zero_tol.tolerance = 0.0;
    CHECK(cmd_verify(zero_tol, scratch("verify_zero_tol")) != 0);

    // Suboptimal is a successful certification.
    RunConfig lazy = good;
    lazy.policy = "zero";
    const fs::path b = scratch("verify_zero_policy");
    CHECK(cmd_verify(lazy, b) == 0);
    CHECK(nlohmann::json::parse(slurp(b / "report.json"))["certificate"]["verdict"] == "suboptimal");
}

TEST_CASE("outputs do not depend on the thread count") {
    const RunConfig c = small_advertising();
    const fs::path one = scratch("threads_1");
    const fs::path three = scratch("threads_3");
    cmd_verify(c, one, RunOptions{1});
    cmd_verify(c, three, RunOptions{3});
    CHECK(slurp(one / "report.json") == slurp(three / "report.json"));
    CHECK(slurp(one / "report.md") == slurp(three / "report.md"));
    CHECK(slurp(one / "config.ini") == slurp(three / "config.ini"));
}

TEST_CASE("solve and simulate write their artifacts") {
    RunConfig c = small_advertising();
    const fs::path s = scratch("solve");
    CHECK(cmd_solve(c, s) == 0);
    CHECK(slurp(s / "field.csv").rfind("t,x,v,dvdx\n", 0) == 0);
    const auto sj = nlohmann::json::parse(slurp(s / "solve.json"));
    CHECK(sj.contains("residual"));

    c.paths = 200;
    c.csv_paths = 3;
    const fs::path m = scratch("simulate");
    CHECK(cmd_simulate(c, m) == 0);
    CHECK(slurp(m / "paths.csv").rfind("path,step,t,x1,z1,exited\n", 0) == 0);
    const auto mj = nlohmann::json::parse(slurp(m / "estimate.json"));
    CHECK(mj.contains("cost"));
}

TEST_CASE("benchmark command") {
    const fs::path out = scratch("benchmark");
    BenchmarkArgs args;
    CHECK(cmd_benchmark("advertising", args, out) == 0);
    CHECK(slurp(out / "coefficients.csv").rfind("t,a,b\n", 0) == 0);
    CHECK(slurp(out / "profile.csv").rfind("t,x,v,dvdx,feedback\n", 0) == 0);
    CHECK_THROWS_AS(cmd_benchmark("nonexistent", args, out), DomainError);
    BenchmarkArgs invalid;
    invalid.alpha = 0.01;
    invalid.beta = 2.0;
    CHECK_THROWS_AS(cmd_benchmark("advertising", invalid, out), DomainError);
    BenchmarkArgs outside;
    outside.times = {2.0};
    CHECK_THROWS_AS(cmd_benchmark("advertising", outside, out), DomainError);
}
