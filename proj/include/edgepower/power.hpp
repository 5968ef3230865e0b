#pragma once

#include <cstdint>
#include <optional>

#include "edgepower/analytic.hpp"

namespace edgepower {

// Phi(x) = erfc(-x/sqrt(2))/2; accurate in both tails.
double normal_cdf(double x);

// Inverse of normal_cdf on (0,1): rational approximation plus one Newton
// refinement; absolute error < 1e-9 over [1e-15, 1-1e-15].
double normal_quantile(double q);

// z_{1-alpha/m}. Exact mode evaluates the quantile through the lower tail
// (-Phi^{-1}(alpha/m), precision-safe for tiny alpha/m); approximate mode
// returns sqrt(2 log(m/alpha)), which overshoots the exact value.
double bonferroni_quantile(double alpha, std::int64_t m, bool approximate);

// One-sided detection of a positive partial correlation among m Bonferroni-
// corrected tests. n is real-valued so that size formulas invert exactly.
struct PowerQuery {
    double n = 0.0;
    std::int64_t p = 0;
    double rho = 0.0;             // alternative partial correlation, in (0,1)
    double alpha = 0.05;
    std::optional<std::int64_t> m;  // default p(p-1)/2

    std::int64_t tests() const;   // m or its default
    void validate() const;
};

// Phi(sqrt(n) rho - z_{1-alpha/m}), z per the selected quantile mode.
double asymptotic_power(const PowerQuery& q, bool approximate_quantile);

// (z_{1-alpha/m}/rho)^2 with the exact quantile and m = p(p-1)/2: the sample
// size at which the one-sided Bonferroni test reaches power 1/2.
double sample_size_asymptotic(double rho, std::int64_t p, double alpha);

struct StudyPlan {
    double n_kld = 0.0;         // KLD-route required size (power ~ 1/2)
    double n_asymptotic = 0.0;  // asymptotic-route required size
    double kld_per_obs = 0.0;   // nats
    RhoRegime regime;
    bool valid = true;          // false when |rho| >= 1/sqrt(2)
};

// Detectability rule: the study KLD must exceed z_{1-alpha}^2, i.e.
// n_kld = z_{1-alpha}^2 / kld_mixture_approx(rho, p). Both routes reported.
StudyPlan sample_size_kld(double rho, std::int64_t p, double alpha);

struct EstimatorSummary {
    std::int64_t f = 0;          // degrees of freedom, n + 1 - p
    double expected_value = 0.0;
    double efficacy = 0.0;       // (f/2) (Gamma(f/2)/Gamma((f+1)/2))^2, -> 1
};

// Expected value of the sample partial correlation under the alternative:
//   (2/f) (Gamma((f+1)/2)/Gamma(f/2))^2 rho 2F1(1/2, 1/2; (f+2)/2; rho^2),
// with the Gauss series truncated at 1e-14 relative and log-gamma ratios.
// Requires f = n + 1 - p >= 1 (the classical route needs n > p - 1).
EstimatorSummary expected_partial_correlation(double rho, std::int64_t n, std::int64_t p);

// Exposed for direct study of the f -> infinity limit.
double estimator_efficacy(std::int64_t f);

}  // namespace edgepower
