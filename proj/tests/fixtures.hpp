// Synthetic dataset builders for trainer tests.
#pragma once

#include <Eigen/Dense>
#include <random>

#include "dpfl/dataset.hpp"

namespace fixtures {

/// Wraps raw matrices in a Dataset with a neutral synthetic schema.
inline dpfl::Dataset make_dataset(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y) {
    dpfl::Dataset ds;
    ds.X = X;
    ds.Y = Y;
    ds.schema.predictors.push_back(dpfl::VarRole{dpfl::Quantity::Const, -1, false});
    for (int j = 1; j < X.cols(); ++j)
        ds.schema.predictors.push_back(dpfl::VarRole{dpfl::Quantity::Lift, j, false});
    for (int j = 0; j < Y.cols(); ++j)
        ds.schema.responses.push_back(dpfl::VarRole{dpfl::Quantity::Lift, 1000 + j, false});
    return ds;
}

struct LinearFixture {
    dpfl::Dataset ds;
    Eigen::MatrixXd beta; ///< generating coefficients
};

/// Exactly linear data Y = X beta with an intercept column and Gaussian
/// predictor entries; optional additive response noise.
inline LinearFixture linear_data(int n, int n_x, int n_y, unsigned seed,
                                 double noise_std = 0.0) {
    std::mt19937_64 eng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd X(n, n_x);
    X.col(0).setOnes();
    for (int i = 0; i < n; ++i)
        for (int j = 1; j < n_x; ++j) X(i, j) = gauss(eng);
    Eigen::MatrixXd beta(n_x, n_y);
    for (int i = 0; i < n_x; ++i)
        for (int j = 0; j < n_y; ++j) beta(i, j) = gauss(eng);
    Eigen::MatrixXd Y = X * beta;
    if (noise_std > 0.0)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n_y; ++j) Y(i, j) += noise_std * gauss(eng);
    LinearFixture f;
    f.ds = make_dataset(X, Y);
    f.beta = beta;
    return f;
}

} // namespace fixtures
