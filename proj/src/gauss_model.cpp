#include "edgepower/gauss_model.hpp"

#include <cmath>
#include <random>

#include "edgepower/errors.hpp"
#include "edgepower/rng.hpp"
#include "sampling_detail.hpp"

namespace edgepower {

GaussianModel::GaussianModel(Eigen::VectorXd mean, Eigen::MatrixXd covariance)
    : mean_(std::move(mean)), covariance_(std::move(covariance)) {
    const auto p = mean_.size();
    if (p < 1) {
        throw DomainError("model dimension must be >= 1");
    }
    if (covariance_.rows() != p || covariance_.cols() != p) {
        throw DimensionError("covariance shape does not match mean length");
    }
    if (!covariance_.allFinite() || !mean_.allFinite()) {
        throw DomainError("model contains non-finite entries");
    }
    const double scale = covariance_.cwiseAbs().maxCoeff();
    const double asym = (covariance_ - covariance_.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-12 * (1.0 + scale)) {
        throw DefinitenessError("covariance is not symmetric (1e-12 relative)");
    }
    llt_.compute(covariance_);
    if (llt_.info() != Eigen::Success) {
        throw DefinitenessError("covariance is not positive definite");
    }
    log_det_ = 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
}

GaussianModel GaussianModel::identity(int p) {
    return GaussianModel(Eigen::VectorXd::Zero(p), Eigen::MatrixXd::Identity(p, p));
}

Eigen::MatrixXd GaussianModel::precision() const {
    return llt_.solve(Eigen::MatrixXd::Identity(dim(), dim()));
}

void PrecisionPerturbation::validate() const {
    if (dim < 2) {
        throw DomainError("perturbation dimension must be >= 2");
    }
    const std::size_t expected_edges =
        kind == PerturbationKind::TwoEdgePrecision ? 2u : 1u;
    if (edges.size() != expected_edges) {
        throw DomainError("wrong edge count for perturbation kind");
    }
    for (const Edge& e : edges) {
        if (e.u < 1 || e.v < 1 || e.u > dim || e.v > dim) {
            throw DomainError("edge index out of range 1..p");
        }
        if (e.u >= e.v) {
            throw DomainError("edges must satisfy u < v");
        }
    }
    if (edges.size() == 2) {
        const Edge& a = edges[0];
        const Edge& b = edges[1];
        if (a.u == b.u || a.u == b.v || a.v == b.u || a.v == b.v) {
            throw DomainError("the two perturbed edges must be disjoint");
        }
    }
    if (!std::isfinite(rho)) {
        throw DomainError("rho must be finite");
    }
}

GaussianModel materialize(const PrecisionPerturbation& perturbation) {
    perturbation.validate();
    const int p = perturbation.dim;
    const double rho = perturbation.rho;
    if (!(std::abs(rho) < 1.0)) {
        throw DefinitenessError("|rho| >= 1: perturbed matrix is not positive definite");
    }
    Eigen::MatrixXd m = Eigen::MatrixXd::Identity(p, p);
    for (const Edge& e : perturbation.edges) {
        m(e.u - 1, e.v - 1) += rho;
        m(e.v - 1, e.u - 1) += rho;
    }
    if (perturbation.kind == PerturbationKind::SingleEdgeCovariance) {
        return GaussianModel(Eigen::VectorXd::Zero(p), std::move(m));
    }
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success) {
        throw DefinitenessError("perturbed precision matrix is not positive definite");
    }
    Eigen::MatrixXd sigma = llt.solve(Eigen::MatrixXd::Identity(p, p));
    sigma = ((sigma + sigma.transpose()) * 0.5).eval();  // kill solver round-off asymmetry
    return GaussianModel(Eigen::VectorXd::Zero(p), std::move(sigma));
}

double edge_determinant(double rho) {
    if (!(std::abs(rho) < 1.0)) {
        throw DomainError("|rho| must be < 1 for edge_determinant");
    }
    return 1.0 - rho * rho;
}

double edge_trace_of_inverse(std::int64_t p, double rho) {
    if (p < 2) {
        throw DomainError("p must be >= 2 for edge_trace_of_inverse");
    }
    if (!(std::abs(rho) < 1.0)) {
        throw DomainError("|rho| must be < 1 for edge_trace_of_inverse");
    }
    return static_cast<double>(p) - 2.0 + 2.0 / (1.0 - rho * rho);
}

double partial_correlation(const GaussianModel& model, int u, int v) {
    const int p = model.dim();
    if (u < 1 || v < 1 || u > p || v > p) {
        throw DomainError("indices must lie in 1..p");
    }
    if (u == v) {
        throw DomainError("partial correlation needs two distinct variables");
    }
    const Eigen::MatrixXd prec = model.precision();
    return -prec(u - 1, v - 1) / std::sqrt(prec(u - 1, u - 1) * prec(v - 1, v - 1));
}

KldResult kld_gaussian(const GaussianModel& f1, const GaussianModel& f0) {
    const int p = f1.dim();
    if (p != f0.dim()) {
        throw DimensionError("models have different dimensions");
    }
    // D(f1||f0) per the log-likelihood-ratio definition.
    const double log_det_term = f0.log_det_covariance() - f1.log_det_covariance();
    const double trace_term = f0.chol().solve(f1.covariance()).trace();
    const Eigen::VectorXd d = f1.mean() - f0.mean();
    const double mean_term = d.dot(f0.chol().solve(d));
    KldResult out;
    out.value = 0.5 * (log_det_term + trace_term - static_cast<double>(p) + mean_term);
    out.method = Method::Exact;
    out.valid = true;
    return out;
}

namespace detail {

void fill_normal_block(std::uint64_t seed, std::uint64_t block, Eigen::MatrixXd& out) {
    std::mt19937_64 engine = block_engine(seed, block);
    std::normal_distribution<double> normal;
    const auto rows = out.rows();
    const auto cols = out.cols();
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
            out(i, j) = normal(engine);
        }
    }
}

void fill_mixture_block(double rho, std::uint64_t seed, std::uint64_t block,
                        Eigen::MatrixXd& out) {
    fill_normal_block(seed, block, out);
    const double ratio = std::sqrt((1.0 + rho) / (1.0 - rho));
    const double denom = 2.0 * std::sqrt(1.0 + rho);
    const double a = (1.0 + ratio) / denom;
    const double b = (1.0 - ratio) / denom;
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        const double z1 = out(i, 0);
        const double z2 = out(i, 1);
        out(i, 0) = a * z1 + b * z2;
        out(i, 1) = a * z2 + b * z1;
    }
}

void fill_covariance_edge_block(double rho, std::uint64_t seed, std::uint64_t block,
                                Eigen::MatrixXd& out) {
    fill_normal_block(seed, block, out);
    const double s = std::sqrt(1.0 - rho * rho);
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        out(i, 1) = rho * out(i, 0) + s * out(i, 1);
    }
}

void fill_model_block(const GaussianModel& model, std::uint64_t seed, std::uint64_t block,
                      Eigen::MatrixXd& out) {
    fill_normal_block(seed, block, out);
    out = (out * model.chol().matrixL().transpose()).eval();
    out.rowwise() += model.mean().transpose();
}

}  // namespace detail

namespace {

template <typename FillBlock>
SampleBatch assemble_batch(int p, std::int64_t n, std::uint64_t seed, FillBlock&& fill) {
    if (n < 1) {
        throw DomainError("sample count must be >= 1");
    }
    SampleBatch batch;
    batch.n = n;
    batch.dim = p;
    batch.seed = seed;
    batch.data.resize(n, p);
    const auto block_len = static_cast<std::int64_t>(kSeedBlock);
    const std::int64_t blocks = (n + block_len - 1) / block_len;
    Eigen::MatrixXd block(kSeedBlock, p);
    for (std::int64_t b = 0; b < blocks; ++b) {
        const std::int64_t lo = b * block_len;
        const std::int64_t rows = std::min<std::int64_t>(block_len, n - lo);
        fill(static_cast<std::uint64_t>(b), block);
        batch.data.middleRows(lo, rows) = block.topRows(rows);
    }
    return batch;
}

}  // namespace

SampleBatch sample_mixture_conditional(int p, double rho, std::int64_t n, std::uint64_t seed) {
    if (p < 2) {
        throw DomainError("p must be >= 2 for the single-edge sampler");
    }
    if (!(std::abs(rho) < 1.0)) {
        throw DomainError("|rho| must be < 1 for the single-edge sampler");
    }
    return assemble_batch(p, n, seed, [&](std::uint64_t b, Eigen::MatrixXd& block) {
        detail::fill_mixture_block(rho, seed, b, block);
    });
}

SampleBatch sample_model(const GaussianModel& model, std::int64_t n, std::uint64_t seed) {
    return assemble_batch(model.dim(), n, seed, [&](std::uint64_t b, Eigen::MatrixXd& block) {
        detail::fill_model_block(model, seed, b, block);
    });
}

}  // namespace edgepower
