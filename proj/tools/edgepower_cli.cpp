#include <CLI11.hpp>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "edgepower/analytic.hpp"
#include "edgepower/errors.hpp"
#include "edgepower/gauss_model.hpp"
#include "edgepower/mc_kld.hpp"
#include "edgepower/power.hpp"

namespace ep = edgepower;
using nlohmann::json;

namespace {

json to_json(const ep::RhoRegime& g) {
    json j;
    j["rho"] = g.rho;
    j["major_term_finite_variance"] = g.major_term_finite_variance;
    j["minor_term_finite_variance"] = g.minor_term_finite_variance;
    j["minor_term_finite_mean"] = g.minor_term_finite_mean;
    j["tau_upper_bound"] = g.tau_upper_bound ? json(*g.tau_upper_bound) : json(nullptr);
    return j;
}

json to_json(const ep::KldResult& r, std::optional<std::uint64_t> seed = std::nullopt) {
    json j;
    j["value"] = r.value;
    j["method"] = ep::method_name(r.method);
    j["valid"] = r.valid;
    if (r.regime) {
        j["regime"] = to_json(*r.regime);
    }
    if (r.mc_stderr) {
        j["stderr"] = *r.mc_stderr;
    }
    if (seed) {
        j["seed"] = *seed;
    }
    if (r.heavy_tail) {
        j["heavy_tail"] = true;
    }
    if (r.iqr_stderr) {
        j["iqr_stderr"] = *r.iqr_stderr;
    }
    return j;
}

void collect_warnings(const ep::KldResult& r, std::vector<std::string>& warnings) {
    if (!r.valid) {
        warnings.push_back(
            "approximation invalid: requires |rho| < 1/sqrt(2) = 0.7071067811865476");
    }
    if (r.heavy_tail) {
        warnings.push_back(
            "heavy-tail regime (|rho| >= 1/sqrt(5) = 0.4472135954999579): "
            "stderr may be unreliable; compare with iqr_stderr");
    }
}

void print_envelope(const std::string& command, json inputs, json results,
                    const std::vector<std::string>& warnings) {
    json env;
    env["schema_version"] = "1";
    env["command"] = command;
    env["inputs"] = std::move(inputs);
    env["results"] = std::move(results);
    env["warnings"] = warnings;
    std::cout << env.dump(2) << '\n';
}

ep::GaussianModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open model file: " + path);
    }
    long long p = 0;
    if (!(in >> p) || p < 1) {
        throw ep::DomainError("model file must start with the dimension p: " + path);
    }
    if (p > 5000) {
        throw ep::DomainError("model dimension exceeds the dense cap (5000): " + path);
    }
    Eigen::MatrixXd m(p, p);
    for (long long i = 0; i < p; ++i) {
        for (long long j = 0; j < p; ++j) {
            if (!(in >> m(i, j))) {
                throw ep::DomainError("model file truncated or non-numeric: " + path);
            }
        }
    }
    return ep::GaussianModel(Eigen::VectorXd::Zero(p), std::move(m));
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open output path: " + path);
    }
    out << content;
    if (!out) {
        throw std::runtime_error("failed writing output path: " + path);
    }
}

std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "edgepower: detectability of nonzero partial correlations in Gaussian "
        "graphical models via Kullback-Leibler divergence (exact forms, large-p "
        "approximations, Monte Carlo checks, and study-size planning). All "
        "divergences are per observation, in nats."};
    app.require_subcommand(1);

    // ---- kld -------------------------------------------------------------
    auto* kld = app.add_subcommand("kld", "Divergence computations");
    kld->require_subcommand(1);

    double rho = 0.0;
    std::int64_t p = 0;
    std::int64_t samples = 100000;
    std::uint64_t seed = 0;
    std::int64_t chunk = 16384;

    auto* exact_edge = kld->add_subcommand(
        "exact-edge", "Exact single-edge divergence log(1-rho^2)/2 + rho^2/(1-rho^2)");
    exact_edge->add_option("--rho", rho, "partial-correlation parameter, |rho| < 1")->required();
    exact_edge->callback([&] {
        const ep::KldResult r = ep::kld_single_edge(rho);
        std::vector<std::string> warnings;
        collect_warnings(r, warnings);
        print_envelope("kld exact-edge", {{"rho", rho}}, {{"kld", to_json(r)}}, warnings);
    });

    auto* mix_approx = kld->add_subcommand(
        "mixture-approx", "Leading-order mixture divergence (4/p)((1-rho^2)/sqrt(1-2rho^2)-1)");
    mix_approx->add_option("--rho", rho, "|rho| < 1; approximation valid for |rho| < 1/sqrt(2)")
        ->required();
    mix_approx->add_option("--p", p, "number of variables, >= 3")->required();
    mix_approx->callback([&] {
        const ep::KldResult r = ep::kld_mixture_approx(rho, p);
        std::vector<std::string> warnings;
        collect_warnings(r, warnings);
        print_envelope("kld mixture-approx", {{"rho", rho}, {"p", p}}, {{"kld", to_json(r)}},
                       warnings);
    });

    auto* two_approx = kld->add_subcommand(
        "two-edge-approx", "Two disjoint edges: exactly 4x the mixture approximation");
    two_approx->add_option("--rho", rho, "|rho| < 1; valid for |rho| < 1/sqrt(2)")->required();
    two_approx->add_option("--p", p, "number of variables, >= 5")->required();
    two_approx->callback([&] {
        const ep::KldResult r = ep::kld_two_edges_approx(rho, p);
        std::vector<std::string> warnings;
        collect_warnings(r, warnings);
        print_envelope("kld two-edge-approx", {{"rho", rho}, {"p", p}}, {{"kld", to_json(r)}},
                       warnings);
    });

    auto* cov_approx = kld->add_subcommand(
        "covariance-approx", "Covariance-perturbation mixture (2/p^2)(1/sqrt(1-rho^2)-1)");
    cov_approx->add_option("--rho", rho, "|rho| < 1")->required();
    cov_approx->add_option("--p", p, "number of variables, >= 2")->required();
    cov_approx->callback([&] {
        const ep::KldResult r = ep::kld_covariance_approx(rho, p);
        std::vector<std::string> warnings;
        collect_warnings(r, warnings);
        print_envelope("kld covariance-approx", {{"rho", rho}, {"p", p}}, {{"kld", to_json(r)}},
                       warnings);
    });

    auto* mix_mc = kld->add_subcommand(
        "mixture-mc", "Monte Carlo estimate of the mixture divergence (log-sum-exp stabilized)");
    mix_mc->add_option("--rho", rho, "|rho| < 1")->required();
    mix_mc->add_option("--p", p, "number of variables, 3..5000")->required();
    mix_mc->add_option("--samples", samples, "Monte Carlo draws (default 100000)");
    mix_mc->add_option("--seed", seed, "RNG seed (default 0)");
    mix_mc->add_option("--chunk-size", chunk,
                       "scheduling granularity; never changes results (default 16384)");
    mix_mc->callback([&] {
        ep::McConfig cfg;
        cfg.n_samples = samples;
        cfg.seed = seed;
        cfg.chunk_size = chunk;
        const ep::KldResult r = ep::estimate_mixture_kld(static_cast<int>(p), rho, cfg);
        std::vector<std::string> warnings;
        collect_warnings(r, warnings);
        print_envelope(
            "kld mixture-mc",
            {{"rho", rho}, {"p", p}, {"samples", samples}, {"seed", seed}, {"chunk_size", chunk}},
            {{"kld", to_json(r, seed)}}, warnings);
    });

    std::string model_a;
    std::string model_b;
    auto* general = kld->add_subcommand(
        "general", "Exact divergence D(A||B) between two covariance models read from files "
                   "(first line p, then p rows)");
    general->add_option("--model-a", model_a, "path to the alternative model (f1)")->required();
    general->add_option("--model-b", model_b, "path to the reference model (f0)")->required();
    general->callback([&] {
        const ep::GaussianModel f1 = load_model(model_a);
        const ep::GaussianModel f0 = load_model(model_b);
        const ep::KldResult r = ep::kld_gaussian(f1, f0);
        print_envelope("kld general", {{"model_a", model_a}, {"model_b", model_b}},
                       {{"kld", to_json(r)}}, {});
    });

    // ---- plan ------------------------------------------------------------
    auto* plan = app.add_subcommand("plan", "Study-size and power planning");
    plan->require_subcommand(1);

    double alpha = 0.05;
    double n_real = 0.0;
    std::int64_t m_override = -1;
    bool approx_quantile = false;

    auto* plan_size = plan->add_subcommand(
        "size", "Required sample size by the KLD route (power ~ 0.5) and the asymptotic route");
    plan_size->add_option("--rho", rho, "alternative partial correlation in (0,1)")->required();
    plan_size->add_option("--p", p, "number of variables")->required();
    plan_size->add_option("--alpha", alpha, "one-sided level (default 0.05)");
    plan_size->add_option("--m", m_override, "test count override (default p(p-1)/2)");
    plan_size->callback([&] {
        ep::StudyPlan sp = ep::sample_size_kld(rho, p, alpha);
        std::int64_t m_eff = m_override >= 1 ? m_override : p * (p - 1) / 2;
        if (m_override >= 1) {
            const double z = ep::bonferroni_quantile(alpha, m_eff, false);
            sp.n_asymptotic = (z / rho) * (z / rho);
        }
        json results;
        results["n_kld"] = sp.valid ? json(sp.n_kld) : json(nullptr);
        results["n_kld_ceil"] =
            sp.valid ? json(static_cast<std::int64_t>(std::ceil(sp.n_kld))) : json(nullptr);
        results["n_asymptotic"] = sp.n_asymptotic;
        results["n_asymptotic_ceil"] = static_cast<std::int64_t>(std::ceil(sp.n_asymptotic));
        results["kld_per_obs"] = {{"value", sp.kld_per_obs},
                                  {"method", ep::method_name(ep::Method::AsymptoticInP)}};
        results["valid"] = sp.valid;
        results["regime"] = to_json(sp.regime);
        std::vector<std::string> warnings;
        if (!sp.valid) {
            warnings.push_back(
                "KLD route undefined: requires |rho| < 1/sqrt(2) = 0.7071067811865476; "
                "n_asymptotic is still reported");
        }
        print_envelope("plan size",
                       {{"rho", rho}, {"p", p}, {"alpha", alpha}, {"m", m_eff}},
                       results, warnings);
    });

    auto* plan_power = plan->add_subcommand(
        "power", "One-sided Bonferroni-corrected asymptotic power Phi(sqrt(n) rho - z_{1-alpha/m})");
    plan_power->add_option("--rho", rho, "alternative partial correlation in (0,1)")->required();
    plan_power->add_option("--p", p, "number of variables")->required();
    plan_power->add_option("--n", n_real, "sample size")->required();
    plan_power->add_option("--alpha", alpha, "one-sided level (default 0.05)");
    plan_power->add_option("--m", m_override, "test count override (default p(p-1)/2)");
    plan_power->add_flag("--approx-quantile", approx_quantile,
                         "use z ~ sqrt(2 log(m/alpha)) instead of the exact quantile");
    plan_power->callback([&] {
        ep::PowerQuery q;
        q.n = n_real;
        q.p = p;
        q.rho = rho;
        q.alpha = alpha;
        if (m_override >= 1) {
            q.m = m_override;
        }
        const double power = ep::asymptotic_power(q, approx_quantile);
        const double z = ep::bonferroni_quantile(alpha, q.tests(), approx_quantile);
        json results;
        results["power"] = power;
        results["method"] = ep::method_name(ep::Method::Exact);
        results["quantile"] = {{"mode", approx_quantile ? "approximate" : "exact"}, {"value", z}};
        results["m"] = q.tests();
        std::vector<std::string> warnings;
        if (q.n + 1.0 - static_cast<double>(p) < 1.0) {
            warnings.push_back(
                "classical estimation needs n > p - 1 (f = n+1-p < 1); "
                "the KLD route remains applicable");
        }
        print_envelope("plan power",
                       {{"rho", rho},
                        {"p", p},
                        {"n", n_real},
                        {"alpha", alpha},
                        {"m", q.tests()},
                        {"approx_quantile", approx_quantile}},
                       results, warnings);
    });

    // ---- figure ----------------------------------------------------------
    auto* figure = app.add_subcommand("figure", "Emit figure data series as CSV (+ JSON sidecar)");
    figure->require_subcommand(1);

    std::vector<std::int64_t> p_grid{10, 30, 100, 300};
    std::vector<double> rho2_grid{0.0, 0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45};
    std::string out_path;

    auto* fig1 = figure->add_subcommand(
        "1", "Monte Carlo vs approximate mixture divergence over a p grid");
    fig1->add_option("--rho", rho, "|rho| < 1")->required();
    fig1->add_option("--p-grid", p_grid, "comma-separated p values (default 10,30,100,300)")
        ->delimiter(',');
    fig1->add_option("--samples", samples, "Monte Carlo draws per point (default 100000)");
    fig1->add_option("--seed", seed, "RNG seed (default 0); each p derives its own stream");
    fig1->add_option("--chunk-size", chunk,
                     "scheduling granularity; never changes results (default 16384)");
    fig1->add_option("--out", out_path, "CSV output path; sidecar written next to it as .json")
        ->required();
    fig1->callback([&] {
        ep::McConfig cfg;
        cfg.n_samples = samples;
        cfg.seed = seed;
        cfg.chunk_size = chunk;
        const ep::FigureSeries series = ep::figure1_series(rho, p_grid, cfg);
        write_file(out_path, series.to_csv());
        std::vector<std::string> warnings;
        json slope = nullptr;
        try {
            std::vector<std::pair<double, ep::KldResult>> pts;
            for (const ep::FigureRow& row : series.rows) {
                ep::KldResult r;
                r.value = row.mc_kld;
                pts.emplace_back(static_cast<double>(row.p), r);
            }
            const ep::SlopeFit fit = ep::fit_loglog_slope(pts);
            json points = json::array();
            for (const auto& [x, y] : fit.points) {
                points.push_back({{"log_p", x}, {"log_kld", y}});
            }
            slope = {{"slope", fit.slope},
                     {"intercept", fit.intercept},
                     {"slope_stderr", fit.slope_stderr},
                     {"points", points}};
        } catch (const ep::DomainError& e) {
            warnings.push_back(std::string("slope fit unavailable: ") + e.what());
        }
        if (series.heavy_tail) {
            warnings.push_back(
                "heavy-tail regime (|rho| >= 1/sqrt(5) = 0.4472135954999579): "
                "stderr may be unreliable");
        }
        if (!series.rows.empty() && !series.rows.front().approx_valid) {
            warnings.push_back(
                "approximation invalid: requires |rho| < 1/sqrt(2) = 0.7071067811865476");
        }
        const std::string sidecar =
            std::filesystem::path(out_path).replace_extension("json").string();
        json inputs = {{"rho", rho},          {"p_grid", p_grid}, {"samples", samples},
                       {"seed", seed},        {"chunk_size", chunk}, {"out", out_path}};
        json sidecar_doc;
        sidecar_doc["schema_version"] = "1";
        sidecar_doc["command"] = "figure 1";
        sidecar_doc["inputs"] = inputs;
        sidecar_doc["results"] = {{"rows", series.to_json()},
                                  {"slope_fit", slope},
                                  {"method", ep::method_name(ep::Method::MonteCarlo)}};
        sidecar_doc["warnings"] = warnings;
        write_file(sidecar, sidecar_doc.dump(2) + "\n");
        print_envelope("figure 1", inputs,
                       {{"csv", out_path}, {"json", sidecar}, {"slope_fit", slope}}, warnings);
    });

    auto* fig2 = figure->add_subcommand(
        "2", "Per-observation divergence of the three perturbation kinds against rho^2");
    fig2->add_option("--p", p, "number of variables, >= 5")->required();
    fig2->add_option("--rho2-grid", rho2_grid,
                     "comma-separated rho^2 values (default 0,0.05,...,0.45)")
        ->delimiter(',');
    fig2->add_option("--out", out_path, "CSV output path")->required();
    fig2->callback([&] {
        std::vector<std::string> warnings;
        bool any_invalid = false;
        std::string csv = "rho2,precision_single,covariance_single,precision_double\n";
        for (double r2 : rho2_grid) {
            if (!(r2 >= 0.0 && r2 < 1.0)) {
                throw ep::DomainError("rho2 grid values must lie in [0, 1)");
            }
            const double r = std::sqrt(r2);
            const ep::KldResult single = ep::kld_mixture_approx(r, p);
            const ep::KldResult cov = ep::kld_covariance_approx(r, p);
            const ep::KldResult two = ep::kld_two_edges_approx(r, p);
            any_invalid = any_invalid || !single.valid;
            csv += format_g17(r2);
            csv += ',';
            csv += format_g17(single.value);
            csv += ',';
            csv += format_g17(cov.value);
            csv += ',';
            csv += format_g17(two.value);
            csv += '\n';
        }
        if (any_invalid) {
            warnings.push_back(
                "some rows exceed the precision-mixture domain |rho| < 1/sqrt(2); "
                "their precision columns are reported but invalid");
        }
        write_file(out_path, csv);
        print_envelope("figure 2",
                       {{"p", p}, {"rho2_grid", rho2_grid}, {"out", out_path}},
                       {{"csv", out_path}, {"method", ep::method_name(ep::Method::AsymptoticInP)}},
                       warnings);
    });

    // ---- regime ----------------------------------------------------------
    auto* regime_cmd = app.add_subcommand("regime", "Integrability regime for a given rho");
    regime_cmd->add_option("--rho", rho, "|rho| < 1")->required();
    regime_cmd->callback([&] {
        const ep::RhoRegime g = ep::classify_regime(rho);
        std::vector<std::string> notes;
        if (g.minor_term_finite_variance) {
            notes.push_back("all likelihood-ratio terms have finite variance: the mixture "
                            "approximation and Monte Carlo stderr are both reliable");
        } else if (g.minor_term_finite_mean) {
            notes.push_back("minor-term variance is infinite (|rho| >= 1/sqrt(5)): the "
                            "approximation still applies but Monte Carlo convergence is slow "
                            "and stderr is unreliable");
        } else {
            notes.push_back("minor-term mean is infinite (|rho| >= 1/sqrt(2)): the mixture "
                            "approximation no longer applies; the divergence decays like "
                            "p^{-tau} with 0 < tau < 2(1-rho^2)");
        }
        if (!g.major_term_finite_variance) {
            notes.push_back("major term exp(-rho Z1 Z2) has infinite variance (|rho| >= 1/2)");
        }
        print_envelope("regime", {{"rho", rho}},
                       {{"regime", to_json(g)}, {"notes", notes}}, {});
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const ep::DomainError& e) {
        std::cerr << "domain error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
