#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dpfl/model.hpp"
#include "dpfl/schema.hpp"

namespace dpfl {

struct BusState;

/// Paired predictor/response matrices with physical-role metadata. Immutable
/// by convention; every operation below returns a new value.
struct Dataset {
    Eigen::MatrixXd X; ///< N_s x N_x, first column is the intercept when raw
    Eigen::MatrixXd Y; ///< N_s x N_y
    VariableSchema schema;
    bool chronological = true;
    std::optional<Normalization> normalization;

    int n_samples() const { return static_cast<int>(X.rows()); }
    int n_x() const { return static_cast<int>(X.cols()); }
    int n_y() const { return static_cast<int>(Y.cols()); }
};

/// Extract the schema's columns from solved states, rows in given order.
Dataset assemble_xy(const GridCase& c, const std::vector<BusState>& states,
                    const VariableSchema& schema);

enum class NormalizationMode { None, MinMax, ZScore };

/// Per-column affine normalization; the intercept column is exempt and the
/// parameters are stored on the result for exact inversion.
Dataset normalize(const Dataset& ds, NormalizationMode mode);

/// Chronological prefix split when the dataset is chronological, otherwise a
/// seeded shuffle split.
std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction,
                                  unsigned long long seed = 0);

struct NoiseSpec {
    double std_rel = 0.0; ///< noise std as a fraction of the column RMS
    std::map<std::string, double> per_class; ///< optional per-variable-class override
    unsigned long long seed = 0;
};

/// Additive zero-mean Gaussian noise on every measured column of X and Y
/// (the intercept carries none); per-entry std = std_rel x column RMS.
Dataset inject_noise(const GridCase& c, const Dataset& ds, const NoiseSpec& spec);

struct OutlierSpec {
    double fraction = 0.0;          ///< share of rows corrupted, in [0, 1)
    double magnitude_factor = 10.0; ///< multiplicative gross error, > 1
    unsigned long long seed = 0;
};

/// Scale all response entries of a seeded choice of rows; returns the
/// corrupted copy and the corrupted row indices for ground-truth evaluation.
std::pair<Dataset, std::vector<int>> inject_outliers(const Dataset& ds, const OutlierSpec& spec);

/// Column regrouping of the bundle strategy: regressors [X1 Y2] against
/// targets [Y1 X2], where X2 holds slack/PV voltages and Y2 the slack/PV
/// reactive injections. Index maps point back into the parent dataset.
struct BundlePartition {
    Eigen::MatrixXd X1, X2, Y1, Y2;
    std::vector<int> x1_cols, x2_cols; ///< parent X column indices
    std::vector<int> y1_cols, y2_cols; ///< parent Y column indices
    VariableSchema parent_schema;
};

BundlePartition bundle_partition(const GridCase& c, const Dataset& ds);

/// Rank of the predictor matrix via SVD with relative threshold 1e-10.
int predictor_rank(const Eigen::MatrixXd& X);
bool has_full_column_rank(const Eigen::MatrixXd& X);

/// CSV (17 significant digits) plus sidecar JSON schema file. `path` is the
/// CSV path; the sidecar lives next to it with extension .schema.json.
void save_dataset(const Dataset& ds, const std::string& csv_path);
Dataset load_dataset(const std::string& csv_path);

/// Scale X and Y rows by sqrt(w_i); how quadratic-residual trainers consume
/// forgetting weights.
Dataset scale_rows(const Dataset& ds, const Eigen::VectorXd& weights);

} // namespace dpfl
