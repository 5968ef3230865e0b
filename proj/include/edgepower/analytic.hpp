#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace edgepower {

enum class Method { Exact, AsymptoticInP, MonteCarlo };

std::string method_name(Method m);

// Integrability regime of the mixture likelihood ratio as a function of rho.
// The major term is exp(-rho Z1 Z2) (independent standard normals); the minor
// term is its variance-rescaled counterpart exp(-rho (1-rho^2)^{-1/2} Z1 Z2).
// Thresholds are evaluated with exact arithmetic on rho^2 (compare rho^2
// against 1/5, 1/4, 1/2); boundary values classify as out-of-domain.
struct RhoRegime {
    double rho = 0.0;
    bool major_term_finite_variance = true;  // rho^2 < 1/4
    bool minor_term_finite_variance = true;  // rho^2 < 1/5
    bool minor_term_finite_mean = true;      // rho^2 < 1/2
    // Present iff minor_term_finite_mean is false: the divergence then decays
    // like p^{-tau} with 0 < tau < 2(1-rho^2).
    std::optional<double> tau_upper_bound;
};

// A divergence value in nats plus how it was obtained.
struct KldResult {
    double value = 0.0;                     // nats, per observation
    std::optional<double> mc_stderr;        // present iff method == MonteCarlo
    Method method = Method::Exact;
    // Present when a single rho characterizes the alternative; absent for
    // divergences between two arbitrary models.
    std::optional<RhoRegime> regime;
    // False when an approximation is evaluated outside its stated domain;
    // planners refuse such numbers.
    bool valid = true;
    // Monte Carlo in the infinite-variance regime: the naive stderr may be
    // unreliable, and a nonparametric spread is reported alongside it.
    bool heavy_tail = false;
    std::optional<double> iqr_stderr;       // IQR/1.349/sqrt(n), MC diagnostics
};

RhoRegime classify_regime(double rho);

// Exact single-edge divergence: log(1-rho^2)/2 + rho^2/(1-rho^2). Independent
// of the dimension and of the edge position.
KldResult kld_single_edge(double rho);

// Leading-order divergence of the uniform single-edge precision mixture:
// (4/p)((1-rho^2)/sqrt(1-2 rho^2) - 1), valid for |rho| < 1/sqrt(2).
KldResult kld_mixture_approx(double rho, std::int64_t p);

// Two disjoint perturbed edges: exactly four times the single-edge mixture
// approximation, same validity domain. Requires p >= 5.
KldResult kld_two_edges_approx(double rho, std::int64_t p);

// Covariance-perturbation mixture: (2/p^2)(1/sqrt(1-rho^2) - 1).
KldResult kld_covariance_approx(double rho, std::int64_t p);

// Moment of the likelihood-ratio terms. Unscaled: E[exp(-gamma rho Z1 Z2)] =
// (1 - rho^2 gamma^2)^{-1/2} when |rho| gamma < 1, else +infinity. Scaled
// (variance-rescaled product): (1 - gamma^2 rho^2/(1-rho^2))^{-1/2} when
// gamma^2 rho^2 < 1 - rho^2, else +infinity. gamma must be positive.
double exp_product_moment(double rho, double gamma, bool scaled);

}  // namespace edgepower
