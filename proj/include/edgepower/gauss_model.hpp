#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "edgepower/analytic.hpp"

namespace edgepower {

// Multivariate normal with cached Cholesky factorization and log-determinant.
// Immutable after construction; safe to share across threads.
class GaussianModel {
public:
    // Validates symmetry (1e-12 relative) and positive definiteness.
    GaussianModel(Eigen::VectorXd mean, Eigen::MatrixXd covariance);

    static GaussianModel identity(int p);

    int dim() const { return static_cast<int>(mean_.size()); }
    const Eigen::VectorXd& mean() const { return mean_; }
    const Eigen::MatrixXd& covariance() const { return covariance_; }
    const Eigen::LLT<Eigen::MatrixXd>& chol() const { return llt_; }
    double log_det_covariance() const { return log_det_; }

    // Inverse covariance, solved from the cached factorization.
    Eigen::MatrixXd precision() const;

private:
    Eigen::VectorXd mean_;
    Eigen::MatrixXd covariance_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
    double log_det_ = 0.0;
};

enum class PerturbationKind { SingleEdgePrecision, TwoEdgePrecision, SingleEdgeCovariance };

struct Edge {
    int u = 0;  // 1-based, u < v
    int v = 0;
};

// Declarative description of an alternative model: which matrix is perturbed,
// where, and by how much.
struct PrecisionPerturbation {
    PerturbationKind kind = PerturbationKind::SingleEdgePrecision;
    int dim = 0;
    double rho = 0.0;
    std::vector<Edge> edges;

    // Throws DomainError on structural violations (edge counts, index ranges,
    // overlap); |rho| >= 1 surfaces as a DefinitenessError from materialize.
    void validate() const;
};

// Builds the zero-mean model: precision kinds set Sigma^{-1} = I + rho at the
// listed (symmetrized) edge positions and invert explicitly; the covariance
// kind sets Sigma = I + rho at the edge.
GaussianModel materialize(const PrecisionPerturbation& perturbation);

// Closed-form determinant of the single-edge precision matrix: 1 - rho^2,
// independent of p and of the edge position.
double edge_determinant(double rho);

// Closed-form trace of its inverse: p - 2 + 2/(1 - rho^2).
double edge_trace_of_inverse(std::int64_t p, double rho);

// -sigma^{uv}/sqrt(sigma^{uu} sigma^{vv}) from the precision matrix; u, v are
// 1-based and must differ.
double partial_correlation(const GaussianModel& model, int u, int v);

// Exact divergence D(f1||f0) = E_{X~F1}[log f1(X)/f0(X)] between Gaussians:
//   1/2 [ log(|S0|/|S1|) + tr(S0^{-1} S1) - p + (m1-m0)' S0^{-1} (m1-m0) ].
// The orientation is fixed by the definition: specialized to the single-edge
// model against the identity it reproduces kld_single_edge.
KldResult kld_gaussian(const GaussianModel& f1, const GaussianModel& f0);

struct SampleBatch {
    std::int64_t n = 0;
    int dim = 0;
    std::uint64_t seed = 0;
    Eigen::MatrixXd data;  // n x dim, one draw per row
};

// n i.i.d. draws from the single-edge precision model at edge (1,2), via the
// representation X1 = A Z1 + B Z2, X2 = A Z2 + B Z1 with
//   A = (1 + sqrt((1+rho)/(1-rho)))/(2 sqrt(1+rho)),
//   B = (1 - sqrt((1+rho)/(1-rho)))/(2 sqrt(1+rho)),
// remaining coordinates independent standard normals. Deterministic in seed.
SampleBatch sample_mixture_conditional(int p, double rho, std::int64_t n, std::uint64_t seed);

// Generic sampler for any positive-definite model (Cholesky transform).
SampleBatch sample_model(const GaussianModel& model, std::int64_t n, std::uint64_t seed);

}  // namespace edgepower
