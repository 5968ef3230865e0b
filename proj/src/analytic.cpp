#include "edgepower/analytic.hpp"

#include <cmath>
#include <limits>

#include "edgepower/errors.hpp"

namespace edgepower {

std::string method_name(Method m) {
    switch (m) {
        case Method::Exact: return "Exact";
        case Method::AsymptoticInP: return "AsymptoticInP";
        case Method::MonteCarlo: return "MonteCarlo";
    }
    return "Unknown";
}

namespace {

void require_rho_open_unit(double rho, const char* where) {
    if (!(std::abs(rho) < 1.0)) {
        throw DomainError(std::string("|rho| must be < 1 for ") + where);
    }
}

}  // namespace

RhoRegime classify_regime(double rho) {
    require_rho_open_unit(rho, "classify_regime");
    const double r2 = rho * rho;
    RhoRegime g;
    g.rho = rho;
    // Exact arithmetic on rho^2; boundaries classify as out-of-domain.
    g.minor_term_finite_variance = r2 * 5.0 < 1.0;  // |rho| < 1/sqrt(5)
    g.major_term_finite_variance = r2 * 4.0 < 1.0;  // |rho| < 1/2
    g.minor_term_finite_mean = r2 * 2.0 < 1.0;      // |rho| < 1/sqrt(2)
    if (!g.minor_term_finite_mean) {
        g.tau_upper_bound = 2.0 * (1.0 - r2);
    }
    return g;
}

KldResult kld_single_edge(double rho) {
    require_rho_open_unit(rho, "exact-edge");
    const double r2 = rho * rho;
    KldResult out;
    out.value = 0.5 * std::log1p(-r2) + r2 / (1.0 - r2);
    out.method = Method::Exact;
    out.regime = classify_regime(rho);
    out.valid = true;
    return out;
}

KldResult kld_mixture_approx(double rho, std::int64_t p) {
    require_rho_open_unit(rho, "mixture-approx");
    if (p < 3) {
        throw DomainError("p must be >= 3 for mixture-approx");
    }
    const double r2 = rho * rho;
    KldResult out;
    out.method = Method::AsymptoticInP;
    out.regime = classify_regime(rho);
    out.valid = out.regime->minor_term_finite_mean;
    // Outside |rho| < 1/sqrt(2) this evaluates to inf/nan; reported as data
    // with valid=false rather than an error, so sweeps can show the boundary.
    out.value = (4.0 / static_cast<double>(p)) * ((1.0 - r2) / std::sqrt(1.0 - 2.0 * r2) - 1.0);
    return out;
}

KldResult kld_two_edges_approx(double rho, std::int64_t p) {
    if (p < 5) {
        throw DomainError("p must be >= 5 for two-edge-approx (two disjoint edges)");
    }
    KldResult out = kld_mixture_approx(rho, p);
    out.value = 4.0 * out.value;  // exact factor, power of two
    return out;
}

KldResult kld_covariance_approx(double rho, std::int64_t p) {
    require_rho_open_unit(rho, "covariance-approx");
    if (p < 2) {
        throw DomainError("p must be >= 2 for covariance-approx");
    }
    const double r2 = rho * rho;
    const double lead = 2.0 * (1.0 / std::sqrt(1.0 - r2) - 1.0);
    const double pp = static_cast<double>(p) * static_cast<double>(p);
    KldResult out;
    out.value = lead / pp;
    out.method = Method::AsymptoticInP;
    out.regime = classify_regime(rho);
    out.valid = true;  // the covariance form only needs |rho| < 1
    return out;
}

double exp_product_moment(double rho, double gamma, bool scaled) {
    if (!(gamma > 0.0)) {
        throw DomainError("gamma must be > 0 for exp_product_moment");
    }
    const double r2 = rho * rho;
    const double g2 = gamma * gamma;
    if (scaled) {
        // Finite iff gamma^2 rho^2 < 1 - rho^2, i.e. rho^2 (gamma^2 + 1) < 1;
        // written so the boundary test agrees bit-for-bit with classify_regime.
        if (!(r2 * (g2 + 1.0) < 1.0)) {
            return std::numeric_limits<double>::infinity();
        }
        return 1.0 / std::sqrt(1.0 - g2 * r2 / (1.0 - r2));
    }
    if (!(r2 * g2 < 1.0)) {
        return std::numeric_limits<double>::infinity();
    }
    return 1.0 / std::sqrt(1.0 - r2 * g2);
}

}  // namespace edgepower
