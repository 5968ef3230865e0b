#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "edgepower/analytic.hpp"
#include "edgepower/gauss_model.hpp"

namespace edgepower {

struct McConfig {
    std::int64_t n_samples = 100000;
    std::uint64_t seed = 0;
    // Scheduling granularity hint (draws grabbed per work item, rounded up to
    // whole seed blocks). Estimates are a pure function of (problem, n_samples,
    // seed); chunk_size and thread count never change the result.
    std::int64_t chunk_size = 16384;
    // Dense-path cap on p: the mixture estimator is O(p^2) per sample.
    std::int64_t dense_cap = 5000;
};

// Monte Carlo estimate of the single-edge precision-mixture divergence. Per
// draw from the edge-(1,2) model: log sqrt(1-rho^2) - log C(p,2) + logsumexp
// over all pairs u<v of -rho x_u x_v (max-shifted, no overflow). In the
// |rho| >= 1/sqrt(5) regime the result carries a heavy-tail flag and an
// IQR-based spread next to the naive stderr.
KldResult estimate_mixture_kld(int p, double rho, const McConfig& cfg);

// Same contract for the covariance-perturbation mixture: per-pair terms
// (rho x_u x_v - rho^2 (x_u^2 + x_v^2)/2)/(1-rho^2), weight -log sqrt(1-rho^2).
KldResult estimate_covariance_mixture_kld(int p, double rho, const McConfig& cfg);

// Ground-truth oracle: samples from f1 and averages exact log-density
// differences via the cached factorizations.
KldResult estimate_kld_oracle(const GaussianModel& f1, const GaussianModel& f0, const McConfig& cfg);

// Brute-force estimate of the mixture divergence for small p: draws an edge
// uniformly, samples that component, and evaluates the mixture density by
// direct summation of all C(p,2) component densities. Shares no algebra with
// estimate_mixture_kld; used to cross-validate it on small instances.
KldResult estimate_mixture_kld_bruteforce(int p, double rho, const McConfig& cfg);

struct SlopeFit {
    std::vector<std::pair<double, double>> points;  // (log p, log kld)
    double slope = 0.0;
    double intercept = 0.0;
    double slope_stderr = 0.0;
};

// Ordinary least squares on (ln p, ln KLD). Requires >= 3 points and strictly
// positive divergence estimates.
SlopeFit fit_loglog_slope(const std::vector<std::pair<double, KldResult>>& series);

struct FigureRow {
    std::int64_t p = 0;
    double mc_kld = 0.0;
    double mc_stderr = 0.0;
    double approx_kld = 0.0;
    bool approx_valid = true;
};

struct FigureSeries {
    double rho = 0.0;
    std::uint64_t seed = 0;
    std::vector<FigureRow> rows;
    bool heavy_tail = false;

    // CSV with header p,mc_kld,mc_stderr,approx_kld,approx_valid; numbers
    // printed with 17 significant digits.
    std::string to_csv() const;
    nlohmann::json to_json() const;
};

// One Monte Carlo estimate plus the closed-form approximation per grid point.
// Each p gets its own derived sub-seed, so points are independent and the
// series is deterministic in (rho, grid, cfg).
FigureSeries figure1_series(double rho, const std::vector<std::int64_t>& p_grid, const McConfig& cfg);

// Thread-pool width: EDGEPOWER_THREADS when set (>= 1), else hardware
// concurrency. Affects wall time only, never results.
int resolve_threads();

}  // namespace edgepower
