#include "edgepower/power.hpp"

#include <cmath>
#include <limits>

#include "edgepower/errors.hpp"

namespace edgepower {

double normal_cdf(double x) {
    return 0.5 * std::erfc(-x * M_SQRT1_2);
}

namespace {

// Wichura's PPND16 rational approximation to the normal quantile.
double ppnd16(double q) {
    const double r = q - 0.5;
    if (std::abs(r) <= 0.425) {
        const double t = 0.180625 - r * r;
        const double num =
            (((((((2.5090809287301226727e3 * t + 3.3430575583588128105e4) * t +
                  6.7265770927008700853e4) * t + 4.5921953931549871457e4) * t +
                1.3731693765509461125e4) * t + 1.9715909503065514427e3) * t +
              1.3314166789178437745e2) * t + 3.3871328727963666080e0);
        const double den =
            (((((((5.2264952788528545610e3 * t + 2.8729085735721942674e4) * t +
                  3.9307895800092710610e4) * t + 2.1213794301586595867e4) * t +
                5.3941960214247511077e3) * t + 6.8718700749205790830e2) * t +
              4.2313330701600911252e1) * t + 1.0);
        return r * num / den;
    }
    double t = r < 0.0 ? q : 1.0 - q;
    t = std::sqrt(-std::log(t));
    double x;
    if (t <= 5.0) {
        t -= 1.6;
        const double num =
            (((((((7.74545014278341407640e-4 * t + 2.27238449892691845833e-2) * t +
                  2.41780725177450611770e-1) * t + 1.27045825245236838258e0) * t +
                3.64784832476320460504e0) * t + 5.76949722146069140550e0) * t +
              4.63033784615654529590e0) * t + 1.42343711074968357734e0);
        const double den =
            (((((((1.05075007164441684324e-9 * t + 5.47593808499534494600e-4) * t +
                  1.51986665636164571966e-2) * t + 1.48103976427480074590e-1) * t +
                6.89767334985100004550e-1) * t + 1.67638483018380384940e0) * t +
              2.05319162663775882187e0) * t + 1.0);
        x = num / den;
    } else {
        t -= 5.0;
        const double num =
            (((((((2.01033439929228813265e-7 * t + 2.71155556874348757815e-5) * t +
                  1.24266094738807843860e-3) * t + 2.65321895265761230930e-2) * t +
                2.96560571828504891230e-1) * t + 1.78482653991729133580e0) * t +
              5.46378491116411436990e0) * t + 6.65790464350110377720e0);
        const double den =
            (((((((1.42151175831644588870e-15 * t + 1.84631831751005468180e-6) * t +
                  7.86869131145613259100e-4) * t + 1.48753612908506148525e-2) * t +
                1.36929880922735805310e-1) * t + 5.99832206555887937690e-1) * t +
              1.0));
        x = num / den;
    }
    return r < 0.0 ? -x : x;
}

constexpr double kInvSqrt2Pi = 0.3989422804014326779;

}  // namespace

double normal_quantile(double q) {
    if (!(q > 0.0 && q < 1.0)) {
        throw DomainError("quantile requires 0 < q < 1");
    }
    double x = ppnd16(q);
    // One Newton step through the erfc-based cdf tightens the rational
    // approximation to near machine precision.
    const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
    if (pdf > 1e-300) {
        x -= (normal_cdf(x) - q) / pdf;
    }
    return x;
}

double bonferroni_quantile(double alpha, std::int64_t m, bool approximate) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw DomainError("alpha must lie in (0, 1)");
    }
    if (m < 1) {
        throw DomainError("m must be >= 1");
    }
    const double md = static_cast<double>(m);
    if (approximate) {
        return std::sqrt(2.0 * std::log(md / alpha));
    }
    // Evaluated through the lower tail: alpha/m keeps full precision where
    // 1 - alpha/m would round.
    return -normal_quantile(alpha / md);
}

std::int64_t PowerQuery::tests() const {
    if (m) {
        return *m;
    }
    return p * (p - 1) / 2;
}

void PowerQuery::validate() const {
    if (!(n > 0.0) || !std::isfinite(n)) {
        throw DomainError("n must be positive");
    }
    if (p < 2) {
        throw DomainError("p must be >= 2");
    }
    if (!(rho > 0.0 && rho < 1.0)) {
        throw DomainError("rho must lie in (0, 1): one-sided alternative");
    }
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw DomainError("alpha must lie in (0, 1)");
    }
    if (tests() < 1) {
        throw DomainError("m must be >= 1");
    }
}

double asymptotic_power(const PowerQuery& q, bool approximate_quantile) {
    q.validate();
    const double z = bonferroni_quantile(q.alpha, q.tests(), approximate_quantile);
    return normal_cdf(std::sqrt(q.n) * q.rho - z);
}

double sample_size_asymptotic(double rho, std::int64_t p, double alpha) {
    if (!(rho > 0.0 && rho < 1.0)) {
        throw DomainError("rho must lie in (0, 1)");
    }
    if (p < 2) {
        throw DomainError("p must be >= 2");
    }
    const double z = bonferroni_quantile(alpha, p * (p - 1) / 2, false);
    const double t = z / rho;
    return t * t;
}

StudyPlan sample_size_kld(double rho, std::int64_t p, double alpha) {
    if (!(rho > 0.0 && rho < 1.0)) {
        throw DomainError("rho must lie in (0, 1)");
    }
    const KldResult kld = kld_mixture_approx(rho, p);
    const double z = -normal_quantile(alpha);  // z_{1-alpha}
    StudyPlan plan;
    plan.kld_per_obs = kld.value;
    plan.regime = *kld.regime;
    plan.valid = kld.valid;
    plan.n_kld = kld.valid ? z * z / kld.value
                           : std::numeric_limits<double>::quiet_NaN();
    plan.n_asymptotic = sample_size_asymptotic(rho, p, alpha);
    return plan;
}

namespace {

// Gauss series for 2F1(1/2, 1/2; c; z), z in [0, 1); terms are positive and
// the ratio tends to z, so truncation at 1e-14 relative is safe.
double hyp2f1_half_half(double c, double z) {
    double term = 1.0;
    double sum = 1.0;
    for (int k = 0; k < 200000; ++k) {
        const double kd = static_cast<double>(k);
        term *= (0.5 + kd) * (0.5 + kd) / ((c + kd) * (kd + 1.0)) * z;
        sum += term;
        if (term < 1e-14 * sum) {
            return sum;
        }
    }
    throw DomainError("2F1 series failed to converge (rho too close to 1)");
}

}  // namespace

double estimator_efficacy(std::int64_t f) {
    if (f < 1) {
        throw DomainError("degrees of freedom must be >= 1");
    }
    const double fd = static_cast<double>(f);
    const double lg = std::lgamma(0.5 * fd) - std::lgamma(0.5 * (fd + 1.0));
    return std::exp(std::log(0.5 * fd) + 2.0 * lg);
}

EstimatorSummary expected_partial_correlation(double rho, std::int64_t n, std::int64_t p) {
    if (!(std::abs(rho) < 1.0)) {
        throw DomainError("|rho| must be < 1");
    }
    const std::int64_t f = n + 1 - p;
    if (f < 1) {
        throw DomainError("n too small relative to p: the classical route needs n > p - 1");
    }
    const double fd = static_cast<double>(f);
    const double lg = std::lgamma(0.5 * (fd + 1.0)) - std::lgamma(0.5 * fd);
    const double prefactor = std::exp(std::log(2.0 / fd) + 2.0 * lg);
    EstimatorSummary out;
    out.f = f;
    out.efficacy = estimator_efficacy(f);
    out.expected_value = prefactor * rho * hyp2f1_half_half(0.5 * (fd + 2.0), rho * rho);
    return out;
}

}  // namespace edgepower
