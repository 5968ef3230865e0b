#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <doctest.h>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <json.hpp>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "edgepower/analytic.hpp"
#include "edgepower/gauss_model.hpp"
#include "edgepower/power.hpp"

using nlohmann::json;

namespace {

struct CliRun {
    int status = -1;
    std::string out;
    std::string err;
};

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void spit(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    REQUIRE(out.good());
    out << content;
}

CliRun run_cli(const std::string& args, const std::string& env_prefix = "") {
    std::filesystem::create_directories("cli_tmp");
    const std::string cmd = env_prefix + std::string(EDGEPOWER_CLI_PATH) + " " + args +
                            " > cli_tmp/stdout.txt 2> cli_tmp/stderr.txt";
    const int rc = std::system(cmd.c_str());
    CliRun result;
    result.status = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
    result.out = slurp("cli_tmp/stdout.txt");
    result.err = slurp("cli_tmp/stderr.txt");
    return result;
}

json parse_envelope(const CliRun& run) {
    REQUIRE(run.status == 0);
    const json env = json::parse(run.out);
    CHECK(env.at("schema_version").get<std::string>() == "1");
    CHECK(env.contains("command"));
    CHECK(env.contains("inputs"));
    CHECK(env.contains("results"));
    CHECK(env.at("warnings").is_array());
    return env;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("kld exact-edge envelope") {
    const json env = parse_envelope(run_cli("kld exact-edge --rho 0.3"));
    CHECK(env["command"] == "kld exact-edge");
    CHECK(env["inputs"]["rho"].get<double>() == 0.3);
    const json& k = env["results"]["kld"];
    CHECK(k["value"].get<double>() ==
          doctest::Approx(edgepower::kld_single_edge(0.3).value).epsilon(1e-15));
    CHECK(k["method"] == "Exact");
    CHECK(k["valid"] == true);
    CHECK(k["regime"]["minor_term_finite_variance"] == true);
    CHECK(k["regime"]["tau_upper_bound"].is_null());
    CHECK_FALSE(k.contains("stderr"));
    CHECK(env["warnings"].empty());
}

TEST_CASE("invalid approximations come back as data plus a warning") {
    const json env = parse_envelope(run_cli("kld mixture-approx --rho 0.9 --p 100"));
    CHECK(env["results"]["kld"]["valid"] == false);
    CHECK(env["results"]["kld"]["method"] == "AsymptoticInP");
    REQUIRE(env["warnings"].size() >= 1);
    const std::string w = env["warnings"][0].get<std::string>();
    CHECK(w.find("1/sqrt(2)") != std::string::npos);
}

TEST_CASE("mixture-mc at rho 0 returns exact zeros with seed echoed") {
    const json env =
        parse_envelope(run_cli("kld mixture-mc --rho 0 --p 10 --samples 1000 --seed 7"));
    const json& k = env["results"]["kld"];
    CHECK(k["value"].get<double>() == 0.0);
    CHECK(k["stderr"].get<double>() == 0.0);
    CHECK(k["seed"].get<std::uint64_t>() == 7);
    CHECK(k["method"] == "MonteCarlo");
    CHECK(env["inputs"]["samples"].get<std::int64_t>() == 1000);
}

TEST_CASE("mixture-mc is invariant to chunk size and thread count") {
    const std::string base = "kld mixture-mc --rho 0.3 --p 6 --samples 3000 --seed 11";
    const json a = parse_envelope(run_cli(base + " --chunk-size 16384"));
    const json b = parse_envelope(run_cli(base + " --chunk-size 100"));
    CHECK(a["results"]["kld"]["value"].get<double>() ==
          b["results"]["kld"]["value"].get<double>());
    CHECK(a["results"]["kld"]["stderr"].get<double>() ==
          b["results"]["kld"]["stderr"].get<double>());

    const CliRun one = run_cli(base, "EDGEPOWER_THREADS=1 ");
    const CliRun four = run_cli(base, "EDGEPOWER_THREADS=4 ");
    CHECK(one.status == 0);
    CHECK(one.out == four.out);  // byte-identical stdout
}

TEST_CASE("heavy-tail warning carries the iqr spread") {
    const json env =
        parse_envelope(run_cli("kld mixture-mc --rho 0.5 --p 6 --samples 2000 --seed 3"));
    CHECK(env["results"]["kld"]["heavy_tail"] == true);
    CHECK(env["results"]["kld"]["iqr_stderr"].get<double>() > 0.0);
    REQUIRE(env["warnings"].size() >= 1);
    CHECK(env["warnings"][0].get<std::string>().find("heavy-tail") != std::string::npos);
}

TEST_CASE("exit codes: 0 success, 1 domain error, 2 usage error") {
    CHECK(run_cli("kld exact-edge --rho 0.3").status == 0);
    CHECK(run_cli("--help").status == 0);
    CHECK(run_cli("kld exact-edge --help").status == 0);

    const CliRun domain = run_cli("kld exact-edge --rho 1.5");
    CHECK(domain.status == 1);
    CHECK(domain.err.find("|rho| must be < 1") != std::string::npos);
    CHECK(run_cli("kld mixture-approx --rho 0.3 --p 2").status == 1);
    CHECK(run_cli("kld general --model-a cli_tmp/nope.txt --model-b cli_tmp/nope.txt").status ==
          1);

    CHECK(run_cli("no-such-command").status == 2);
    CHECK(run_cli("kld exact-edge").status == 2);                  // missing required
    CHECK(run_cli("kld exact-edge --rho abc").status == 2);        // unparsable value
    CHECK(run_cli("kld exact-edge --rho 0.3 --bogus 1").status == 2);
    CHECK(run_cli("").status == 2);                                // subcommand required
}

TEST_CASE("plan size and power agree with the library and each other") {
    const json size = parse_envelope(run_cli("plan size --rho 0.447 --p 1000"));
    const edgepower::StudyPlan plan = edgepower::sample_size_kld(0.447, 1000, 0.05);
    CHECK(size["results"]["n_kld"].get<double>() == doctest::Approx(plan.n_kld).epsilon(1e-15));
    CHECK(size["results"]["n_asymptotic"].get<double>() ==
          doctest::Approx(plan.n_asymptotic).epsilon(1e-15));
    CHECK(size["results"]["n_kld_ceil"].get<std::int64_t>() ==
          static_cast<std::int64_t>(std::ceil(plan.n_kld)));
    CHECK(size["results"]["valid"] == true);
    CHECK(size["inputs"]["alpha"].get<double>() == 0.05);  // default echoed
    CHECK(size["inputs"]["m"].get<std::int64_t>() == 499500);

    const json power = parse_envelope(
        run_cli("plan power --rho 0.447 --p 1000 --n 135.28508386213821"));
    CHECK(power["results"]["power"].get<double>() == doctest::Approx(0.5).epsilon(1e-6));

    // Outside the KLD domain: still exit 0, n_kld null, warning present.
    const json invalid = parse_envelope(run_cli("plan size --rho 0.75 --p 100"));
    CHECK(invalid["results"]["n_kld"].is_null());
    CHECK(invalid["results"]["valid"] == false);
    CHECK(invalid["results"]["n_asymptotic"].get<double>() > 0.0);
    CHECK(invalid["warnings"].size() >= 1);

    // Classical-route warning when n <= p - 1.
    const json small_n = parse_envelope(run_cli("plan power --rho 0.447 --p 1000 --n 500"));
    REQUIRE(small_n["warnings"].size() >= 1);
    CHECK(small_n["warnings"][0].get<std::string>().find("n > p - 1") != std::string::npos);

    // Approximate quantile lowers power.
    const json approx = parse_envelope(
        run_cli("plan power --rho 0.447 --p 1000 --n 200 --approx-quantile"));
    const json exact = parse_envelope(run_cli("plan power --rho 0.447 --p 1000 --n 200"));
    CHECK(approx["results"]["power"].get<double>() < exact["results"]["power"].get<double>());
    CHECK(approx["results"]["quantile"]["mode"] == "approximate");
    CHECK(exact["results"]["quantile"]["mode"] == "exact");
}

TEST_CASE("figure 1 writes a deterministic CSV and JSON sidecar") {
    const std::string args =
        "figure 1 --rho 0.3 --p-grid 5,8,13 --samples 2000 --seed 1 --out cli_tmp/fig1.csv";
    const json env = parse_envelope(run_cli(args));
    CHECK(env["results"]["csv"] == "cli_tmp/fig1.csv");
    CHECK(env["results"]["json"] == "cli_tmp/fig1.json");

    const std::string csv = slurp("cli_tmp/fig1.csv");
    CHECK(csv.rfind("p,mc_kld,mc_stderr,approx_kld,approx_valid\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);  // header + 3 rows

    const json sidecar = json::parse(slurp("cli_tmp/fig1.json"));
    CHECK(sidecar["schema_version"] == "1");
    REQUIRE(sidecar["results"]["rows"].size() == 3);
    CHECK(sidecar["results"]["rows"][0]["p"].get<std::int64_t>() == 5);
    CHECK(sidecar["results"]["slope_fit"]["slope"].is_number());
    CHECK(env["results"]["slope_fit"]["slope"].get<double>() ==
          sidecar["results"]["slope_fit"]["slope"].get<double>());

    // Byte-identical rerun, independent of thread count.
    const CliRun first = run_cli(args, "EDGEPOWER_THREADS=1 ");
    const std::string csv1 = slurp("cli_tmp/fig1.csv");
    const std::string side1 = slurp("cli_tmp/fig1.json");
    const CliRun second = run_cli(args, "EDGEPOWER_THREADS=3 ");
    CHECK(first.out == second.out);
    CHECK(slurp("cli_tmp/fig1.csv") == csv1);
    CHECK(slurp("cli_tmp/fig1.json") == side1);
}

TEST_CASE("figure 2 emits the three divergences against rho^2") {
    const json env = parse_envelope(
        run_cli("figure 2 --p 100 --rho2-grid 0,0.1,0.2,0.3 --out cli_tmp/fig2.csv"));
    CHECK(env["results"]["csv"] == "cli_tmp/fig2.csv");
    const std::string csv = slurp("cli_tmp/fig2.csv");
    REQUIRE(csv.rfind("rho2,precision_single,covariance_single,precision_double\n", 0) == 0);
    std::istringstream lines(csv);
    std::string line;
    std::getline(lines, line);  // header
    int rows = 0;
    while (std::getline(lines, line)) {
        double r2 = 0.0, single = 0.0, cov = 0.0, twice = 0.0;
        REQUIRE(std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf", &r2, &single, &cov, &twice) == 4);
        if (rows == 0) {
            CHECK(r2 == 0.0);
            CHECK(single == 0.0);
            CHECK(cov == 0.0);
            CHECK(twice == 0.0);
        } else {
            CHECK(twice == doctest::Approx(4.0 * single).epsilon(1e-15));
            CHECK(single > 0.0);
            CHECK(cov > 0.0);
        }
        const double rho = std::sqrt(r2);
        CHECK(single ==
              doctest::Approx(edgepower::kld_mixture_approx(rho, 100).value).epsilon(1e-15));
        CHECK(cov ==
              doctest::Approx(edgepower::kld_covariance_approx(rho, 100).value).epsilon(1e-15));
        ++rows;
    }
    CHECK(rows == 4);

    CHECK(run_cli("figure 2 --p 100 --rho2-grid 0,1.5 --out cli_tmp/fig2b.csv").status == 1);
    CHECK(run_cli("figure 2 --p 100 --out cli_tmp/no/such/dir/f.csv").status == 1);
}

TEST_CASE("regime explains the thresholds") {
    const json heavy = parse_envelope(run_cli("regime --rho 0.8"));
    CHECK(heavy["results"]["regime"]["minor_term_finite_mean"] == false);
    CHECK(heavy["results"]["regime"]["tau_upper_bound"].get<double>() ==
          doctest::Approx(0.72).epsilon(1e-14));
    CHECK(heavy["results"]["notes"].size() >= 1);

    const json ok = parse_envelope(run_cli("regime --rho 0.447"));
    CHECK(ok["results"]["regime"]["minor_term_finite_variance"] == true);
    CHECK(ok["results"]["regime"]["major_term_finite_variance"] == true);
    CHECK(ok["results"]["regime"]["minor_term_finite_mean"] == true);

    CHECK(run_cli("regime --rho 1").status == 1);
}

TEST_CASE("kld general reads matrix files") {
    // f1: covariance I + 0.25 at edge (1,2); f0: identity.
    spit("cli_tmp/model_a.txt",
         "3\n"
         "1 0.25 0\n"
         "0.25 1 0\n"
         "0 0 1\n");
    spit("cli_tmp/model_b.txt",
         "3\n"
         "1 0 0\n"
         "0 1 0\n"
         "0 0 1\n");
    const json env = parse_envelope(
        run_cli("kld general --model-a cli_tmp/model_a.txt --model-b cli_tmp/model_b.txt"));
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(3, 3);
    a(0, 1) = a(1, 0) = 0.25;
    const edgepower::GaussianModel f1(Eigen::VectorXd::Zero(3), a);
    const double expected = edgepower::kld_gaussian(f1, edgepower::GaussianModel::identity(3)).value;
    CHECK(env["results"]["kld"]["value"].get<double>() ==
          doctest::Approx(expected).epsilon(1e-15));
    CHECK(env["results"]["kld"]["method"] == "Exact");

    // Asymmetric input is a domain error, not a silent repair.
    spit("cli_tmp/asym.txt",
         "2\n"
         "1 0.2\n"
         "0 1\n");
    const CliRun bad = run_cli("kld general --model-a cli_tmp/asym.txt --model-b cli_tmp/model_b.txt");
    CHECK(bad.status == 1);
    CHECK(bad.err.find("symmetric") != std::string::npos);

    // Truncated file.
    spit("cli_tmp/trunc.txt", "3\n1 0 0\n0 1\n");
    CHECK(run_cli("kld general --model-a cli_tmp/trunc.txt --model-b cli_tmp/model_b.txt")
              .status == 1);
}

}  // TEST_SUITE
