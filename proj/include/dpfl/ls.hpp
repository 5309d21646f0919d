#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "dpfl/dataset.hpp"
#include "dpfl/model.hpp"

namespace dpfl {

/// Ordinary least squares, beta = (X^T X)^-1 X^T Y. Requires X of full
/// column rank; a rank-deficient predictor matrix signals multicollinearity
/// and raises "rank-deficient".
LinearModel fit_ols(const Dataset& ds);

enum class DecompositionMethod { Cod, Svd };

/// Least squares through a rank-revealing factorization of X^T X; tolerates
/// rank deficiency by returning the minimum-norm solution (singular values
/// below 1e-10 of the largest are treated as zero).
LinearModel fit_ols_decomposed(const Dataset& ds, DecompositionMethod method);

struct HuberSpec {
    /// Inlier/outlier threshold; when absent, 1.345 x the MAD-based residual
    /// scale of an ordinary least-squares pre-fit is used per response.
    std::optional<double> delta;
    double tol = 1e-8;
    int max_iterations = 200;
};

/// Huber-loss regression solved by iteratively reweighted least squares.
/// The optional trace receives the objective after every iteration.
LinearModel fit_huber(const Dataset& ds, const HuberSpec& spec = {},
                      std::vector<double>* objective_trace = nullptr);

/// Huber objective: e^2 inside the threshold, delta(2|e| - delta) outside.
double huber_objective(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                       const Eigen::MatrixXd& beta, const Eigen::VectorXd& delta);

struct GLSSpec {
    Eigen::MatrixXd omega; ///< N_s x N_s SPD residual covariance shape
};

/// Generalized least squares via triangular whitening,
/// beta = (X^T Omega^-1 X)^-1 X^T Omega^-1 Y.
LinearModel fit_gls(const Dataset& ds, const GLSSpec& spec);

/// Total least squares from the factorization of [X Y]; treats predictor and
/// response noise symmetrically.
LinearModel fit_tls(const Dataset& ds);

struct WTLSSpec {
    /// Per-column noise variances, predictor columns first, then responses.
    /// A zero entry pins the column (it receives no correction); response
    /// variances must be positive.
    Eigen::VectorXd sigma2;
    double tol = 1e-8;
    int max_iterations = 500;

    static WTLSSpec uniform(int n_x, int n_y, double s2);
};

/// Weighted total least squares by alternating minimization over the
/// coefficients and the row-wise predictor corrections.
LinearModel fit_wtls(const Dataset& ds, const WTLSSpec& spec,
                     std::vector<double>* objective_trace = nullptr);

/// Weighted orthogonal-distance objective of `beta` with optimal row-wise
/// corrections; the quantity fit_wtls minimizes.
double wtls_objective(const Dataset& ds, const WTLSSpec& spec, const Eigen::MatrixXd& beta);

enum class Clusterer { KMeans, Gmm };

struct ClusteredLsSpec {
    int k = 1;
    Clusterer clusterer = Clusterer::KMeans;
    unsigned long long seed = 0;
};

/// Cluster the predictor rows, then fit ordinary least squares per cluster.
/// Every cluster must keep at least N_x samples.
PiecewiseLinearModel fit_clustered_ls(const Dataset& ds, const ClusteredLsSpec& spec);

/// Recursive least squares state: current coefficients plus the running
/// inverse-covariance matrix. Single-owner mutable.
struct RLSState {
    Eigen::MatrixXd beta; ///< N_x x N_y
    Eigen::MatrixXd P;    ///< N_x x N_x, symmetric positive definite
    double kappa = 1.0;   ///< forgetting factor in (0, 1]
    VariableSchema schema;
    std::optional<Normalization> normalization;

    LinearModel model() const;
};

/// Batch initialization from an invertible X^T X.
RLSState rls_init(const Dataset& ds, double kappa);

/// Gain-vector update with one new observation.
void rls_update(RLSState& state, const Eigen::VectorXd& x_new, const Eigen::VectorXd& y_new);

} // namespace dpfl
