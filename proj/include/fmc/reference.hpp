#pragma once

// Serial reference versions of the OpenMP kernels. Plain loops, no
// parallelism, no shortcuts; the unit tests and benchmarks compare the
// production kernels against these.

#include <span>
#include <vector>

#include <Eigen/Core>

#include "fmc/grid.hpp"
#include "fmc/trajectory.hpp"

namespace fmc::reference {

Grid conv2d(const Grid& input, const ConvWeights& weights);
Grid group_norm(const Grid& input, int groups, std::span<const double> gamma, std::span<const double> beta,
                double eps = 1e-5);
LinkMask link_mask(const FlowPair& pair, const Grid& fg_prev, const Grid& fg_cur, int frame = 1);
Grid warp_g(const Grid& values, const FlowPair& pair, const LinkMask& mask);

/// Runs mean shift from every seed in turn on one thread.
std::vector<Eigen::VectorXd> mean_shift_modes(const std::vector<Eigen::VectorXd>& points,
                                              const std::vector<Eigen::VectorXd>& seeds, double kappa,
                                              double tol, int max_iter);

}  // namespace fmc::reference
