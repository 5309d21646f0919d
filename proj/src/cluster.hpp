// Internal clustering helpers shared by the piecewise trainers.
#pragma once

#include <Eigen/Dense>
#include <vector>

namespace dpfl::detail {

struct Clustering {
    std::vector<int> assignment;          ///< per-row cluster index
    std::vector<Eigen::VectorXd> centroid;
};

/// Lloyd's algorithm with greedy farthest-point initialization (first center
/// drawn from the seed). Ties resolve to the lowest cluster index.
Clustering kmeans(const Eigen::MatrixXd& X, int k, unsigned long long seed);

/// Diagonal-covariance Gaussian mixture fit by EM, initialized from kmeans;
/// rows are assigned to their maximum-responsibility component.
Clustering gmm(const Eigen::MatrixXd& X, int k, unsigned long long seed);

} // namespace dpfl::detail
