#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "dpfl/schema.hpp"

namespace dpfl {

/// Per-column affine parameters of a normalized dataset: raw = norm * scale + offset.
struct Normalization {
    Eigen::VectorXd x_offset, x_scale;
    Eigen::VectorXd y_offset, y_scale;
};

/// Single linear map y = beta^T x, possibly expressed in a normalized space.
struct LinearModel {
    Eigen::MatrixXd beta; ///< N_x x N_y
    VariableSchema schema;
    std::optional<Normalization> normalization;
    std::map<std::string, std::string> metadata; ///< trainer + hyperparameters

    /// Predict raw-unit responses from raw-unit predictor rows.
    Eigen::MatrixXd predict(const Eigen::MatrixXd& X) const;
};

/// Piecewise linear map: the segment whose centroid is nearest to x applies.
struct PiecewiseLinearModel {
    std::vector<Eigen::MatrixXd> beta;     ///< per-segment N_x x N_y
    std::vector<Eigen::VectorXd> centroid; ///< per-segment predictor-space centroid
    VariableSchema schema;
    std::optional<Normalization> normalization;
    std::map<std::string, std::string> metadata;

    int n_segments() const { return static_cast<int>(beta.size()); }
    /// Nearest-centroid segment; ties resolve to the lowest index.
    int segment_of(const Eigen::VectorXd& x) const;
    Eigen::MatrixXd predict(const Eigen::MatrixXd& X) const;
};

enum class KernelKind { Linear, Polynomial, Rbf, Sigmoid };

struct Kernel {
    KernelKind kind = KernelKind::Linear;
    double gamma = 1.0;  ///< rbf / sigmoid scale
    double coef = 0.0;   ///< polynomial / sigmoid offset
    int degree = 2;      ///< polynomial degree
};

/// Kernel expansion y_j(x) = sum_i d_ij k(x_i, x) + intercept_j over retained
/// training points.
struct KernelModel {
    Kernel kernel;
    Eigen::MatrixXd support_x;  ///< retained predictors, one per row
    Eigen::MatrixXd dual_coefs; ///< n_support x N_y
    Eigen::VectorXd intercept;  ///< per response
    VariableSchema schema;
    std::optional<Normalization> normalization;
    std::map<std::string, std::string> metadata;

    Eigen::MatrixXd predict(const Eigen::MatrixXd& X) const;
};

using AnyModel = std::variant<LinearModel, PiecewiseLinearModel, KernelModel>;

Eigen::MatrixXd predict(const AnyModel& model, const Eigen::MatrixXd& X);
const VariableSchema& model_schema(const AnyModel& model);
const std::map<std::string, std::string>& model_metadata(const AnyModel& model);

/// Closed-form kernel value h(<a, b>) (or of the distance for rbf).
double kernel_eval(const Kernel& k, const Eigen::VectorXd& a, const Eigen::VectorXd& b);

std::string save_model_json(const AnyModel& model);
AnyModel load_model_json(const std::string& text);
void save_model_file(const AnyModel& model, const std::string& path);
AnyModel load_model_file(const std::string& path);

} // namespace dpfl
