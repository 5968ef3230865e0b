#pragma once

#include <Eigen/Core>
#include <cstdint>

namespace edgepower {

class GaussianModel;

namespace detail {

// Block fillers shared by the SampleBatch constructors and the Monte Carlo
// estimators: block b of a run is always the same rows regardless of how many
// blocks are consumed or on which thread. `out` supplies the shape (rows x p).

void fill_normal_block(std::uint64_t seed, std::uint64_t block, Eigen::MatrixXd& out);

// Single-edge precision model at edge (1,2) via the A/B representation.
void fill_mixture_block(double rho, std::uint64_t seed, std::uint64_t block, Eigen::MatrixXd& out);

// Single-edge covariance model at edge (1,2): x2 = rho x1 + sqrt(1-rho^2) z2.
void fill_covariance_edge_block(double rho, std::uint64_t seed, std::uint64_t block,
                                Eigen::MatrixXd& out);

// Generic Cholesky transform sampler.
void fill_model_block(const GaussianModel& model, std::uint64_t seed, std::uint64_t block,
                      Eigen::MatrixXd& out);

}  // namespace detail
}  // namespace edgepower
