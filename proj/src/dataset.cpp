#include "dpfl/dataset.hpp"
#include "dpfl/acpf.hpp"
#include "dpfl/error.hpp"
#include "dpfl/rng.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numeric>
#include <sstream>

namespace dpfl {

using nlohmann::json;

namespace {

double state_value(const GridCase& c, const BusState& s, const VarRole& role) {
    switch (role.quantity) {
        case Quantity::Const: return 1.0;
        case Quantity::Pinj: return s.p_inj(c.bus_index(role.id));
        case Quantity::Qinj: return s.q_inj(c.bus_index(role.id));
        case Quantity::Vm: return s.vm(c.bus_index(role.id));
        case Quantity::Va: return s.va(c.bus_index(role.id));
        case Quantity::Pflow: return role.reverse ? s.p_to(role.id) : s.p_from(role.id);
        case Quantity::Qflow: return role.reverse ? s.q_to(role.id) : s.q_from(role.id);
        case Quantity::Loss: return s.p_from(role.id) + s.p_to(role.id);
        default: fail("schema", "role not derivable from a bus state: " + column_name(role));
    }
}

void check_role(const GridCase& c, const VarRole& role) {
    switch (role.quantity) {
        case Quantity::Const: return;
        case Quantity::Pinj:
        case Quantity::Qinj:
        case Quantity::Vm:
        case Quantity::Va:
            c.bus_index(role.id); // throws on unknown bus
            return;
        case Quantity::Pflow:
        case Quantity::Qflow:
        case Quantity::Loss:
            if (role.id < 0 || role.id >= c.n_branches())
                fail("schema", "unknown branch index " + std::to_string(role.id));
            return;
        default:
            fail("schema", "role not derivable from a bus state: " + column_name(role));
    }
}

} // namespace

Dataset assemble_xy(const GridCase& c, const std::vector<BusState>& states,
                    const VariableSchema& schema) {
    if (states.empty()) fail("invalid-argument", "no states to assemble");
    for (const auto& r : schema.predictors) check_role(c, r);
    for (const auto& r : schema.responses) check_role(c, r);

    Dataset ds;
    ds.schema = schema;
    ds.chronological = true;
    const int n = static_cast<int>(states.size());
    ds.X.resize(n, schema.n_x());
    ds.Y.resize(n, schema.n_y());
    for (int i = 0; i < n; ++i) {
        for (int p = 0; p < schema.n_x(); ++p)
            ds.X(i, p) = state_value(c, states[i], schema.predictors[p]);
        for (int r = 0; r < schema.n_y(); ++r)
            ds.Y(i, r) = state_value(c, states[i], schema.responses[r]);
    }
    return ds;
}

Dataset normalize(const Dataset& ds, NormalizationMode mode) {
    if (mode == NormalizationMode::None) return ds;
    if (ds.normalization) fail("invalid-argument", "dataset is already normalized");

    Normalization n;
    n.x_offset = Eigen::VectorXd::Zero(ds.n_x());
    n.x_scale = Eigen::VectorXd::Ones(ds.n_x());
    n.y_offset = Eigen::VectorXd::Zero(ds.n_y());
    n.y_scale = Eigen::VectorXd::Ones(ds.n_y());

    auto fit_column = [&](const Eigen::VectorXd& col, double& offset, double& scale,
                          const std::string& name) {
        if (mode == NormalizationMode::MinMax) {
            const double lo = col.minCoeff(), hi = col.maxCoeff();
            if (hi == lo) fail("degenerate-column", "constant column under minmax: " + name);
            offset = lo;
            scale = hi - lo;
        } else {
            const double mean = col.mean();
            const double var = (col.array() - mean).square().sum() / col.size();
            if (var <= 0.0) fail("degenerate-column", "zero-variance column under zscore: " + name);
            offset = mean;
            scale = std::sqrt(var);
        }
    };

    Dataset out = ds;
    for (int j = 0; j < ds.n_x(); ++j) {
        if (ds.schema.predictors[j].quantity == Quantity::Const) continue;
        fit_column(ds.X.col(j), n.x_offset(j), n.x_scale(j),
                   column_name(ds.schema.predictors[j]));
        out.X.col(j) = (ds.X.col(j).array() - n.x_offset(j)) / n.x_scale(j);
    }
    for (int j = 0; j < ds.n_y(); ++j) {
        fit_column(ds.Y.col(j), n.y_offset(j), n.y_scale(j), column_name(ds.schema.responses[j]));
        out.Y.col(j) = (ds.Y.col(j).array() - n.y_offset(j)) / n.y_scale(j);
    }
    out.normalization = std::move(n);
    return out;
}

std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction,
                                  unsigned long long seed) {
    if (train_fraction <= 0.0 || train_fraction >= 1.0)
        fail("invalid-argument", "train fraction must lie in (0, 1)");
    const int n = ds.n_samples();
    const int n_train = static_cast<int>(std::llround(train_fraction * n));
    if (n_train < 1 || n_train >= n) fail("invalid-argument", "split leaves an empty side");

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    if (!ds.chronological) {
        Rng rng(derive_seed(seed, 0x5eed));
        for (int i = n - 1; i > 0; --i)
            std::swap(order[i], order[static_cast<int>(rng.index(i + 1))]);
    }

    auto take = [&](int begin, int count) {
        Dataset out;
        out.schema = ds.schema;
        out.chronological = ds.chronological;
        out.normalization = ds.normalization;
        out.X.resize(count, ds.n_x());
        out.Y.resize(count, ds.n_y());
        for (int i = 0; i < count; ++i) {
            out.X.row(i) = ds.X.row(order[begin + i]);
            out.Y.row(i) = ds.Y.row(order[begin + i]);
        }
        return out;
    };
    return {take(0, n_train), take(n_train, n - n_train)};
}

Dataset inject_noise(const GridCase& c, const Dataset& ds, const NoiseSpec& spec) {
    if (spec.std_rel < 0.0) fail("invalid-argument", "noise std must be nonnegative");
    Dataset out = ds;
    Rng rng(derive_seed(spec.seed, 0xA015Eull));
    auto corrupt = [&](Eigen::MatrixXd& M, const std::vector<VarRole>& roles) {
        for (int j = 0; j < M.cols(); ++j) {
            if (roles[j].quantity == Quantity::Const) continue;
            double rel = spec.std_rel;
            auto it = spec.per_class.find(variable_class(roles[j], c));
            if (it != spec.per_class.end()) rel = it->second;
            if (rel == 0.0) continue;
            const double rms = std::sqrt(M.col(j).squaredNorm() / M.rows());
            const double std = rel * rms;
            for (int i = 0; i < M.rows(); ++i) M(i, j) += rng.normal(0.0, std);
        }
    };
    corrupt(out.X, ds.schema.predictors);
    corrupt(out.Y, ds.schema.responses);
    return out;
}

std::pair<Dataset, std::vector<int>> inject_outliers(const Dataset& ds, const OutlierSpec& spec) {
    if (spec.fraction < 0.0 || spec.fraction >= 1.0)
        fail("invalid-argument", "outlier fraction must lie in [0, 1)");
    if (spec.magnitude_factor <= 1.0)
        fail("invalid-argument", "outlier magnitude factor must exceed 1");
    Dataset out = ds;
    const int n = ds.n_samples();
    const int n_bad = static_cast<int>(std::llround(spec.fraction * n));
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(spec.seed, 0x0117ull));
    for (int i = n - 1; i > 0; --i)
        std::swap(order[i], order[static_cast<int>(rng.index(i + 1))]);
    std::vector<int> bad(order.begin(), order.begin() + n_bad);
    std::sort(bad.begin(), bad.end());
    for (int i : bad) out.Y.row(i) *= spec.magnitude_factor;
    return {std::move(out), std::move(bad)};
}

BundlePartition bundle_partition(const GridCase& c, const Dataset& ds) {
    BundlePartition bp;
    bp.parent_schema = ds.schema;

    auto is_gen_bus = [&](int id) {
        const BusType t = c.buses[c.bus_index(id)].type;
        return t == BusType::PV || t == BusType::Slack;
    };

    for (int j = 0; j < ds.n_x(); ++j) {
        const VarRole& r = ds.schema.predictors[j];
        if (r.quantity == Quantity::Vm && is_gen_bus(r.id))
            bp.x2_cols.push_back(j);
        else
            bp.x1_cols.push_back(j);
    }
    for (int j = 0; j < ds.n_y(); ++j) {
        const VarRole& r = ds.schema.responses[j];
        if (r.quantity == Quantity::Qinj && is_gen_bus(r.id))
            bp.y2_cols.push_back(j);
        else
            bp.y1_cols.push_back(j);
    }
    if (bp.x2_cols.empty())
        fail("schema", "bundle partition needs slack/PV voltage predictors");
    if (bp.y2_cols.size() != bp.x2_cols.size())
        fail("schema", "bundle partition needs matching slack/PV reactive responses (" +
                           std::to_string(bp.y2_cols.size()) + " vs " +
                           std::to_string(bp.x2_cols.size()) + ")");

    auto gather = [&](const Eigen::MatrixXd& M, const std::vector<int>& cols) {
        Eigen::MatrixXd out(M.rows(), cols.size());
        for (size_t k = 0; k < cols.size(); ++k) out.col(k) = M.col(cols[k]);
        return out;
    };
    bp.X1 = gather(ds.X, bp.x1_cols);
    bp.X2 = gather(ds.X, bp.x2_cols);
    bp.Y1 = gather(ds.Y, bp.y1_cols);
    bp.Y2 = gather(ds.Y, bp.y2_cols);
    return bp;
}

int predictor_rank(const Eigen::MatrixXd& X) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(X);
    const Eigen::VectorXd& sv = svd.singularValues();
    if (sv.size() == 0) return 0;
    const double thresh = 1e-10 * sv(0);
    int rank = 0;
    for (int i = 0; i < sv.size(); ++i)
        if (sv(i) > thresh) ++rank;
    return rank;
}

bool has_full_column_rank(const Eigen::MatrixXd& X) {
    return predictor_rank(X) == X.cols();
}

namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string sidecar_path(const std::string& csv_path) {
    return csv_path + ".schema.json";
}

json roles_json(const std::vector<VarRole>& roles) {
    json out = json::array();
    for (const auto& r : roles) out.push_back(column_name(r));
    return out;
}

} // namespace

void save_dataset(const Dataset& ds, const std::string& csv_path) {
    std::ofstream csv(csv_path);
    if (!csv) fail("io", "cannot write dataset: " + csv_path);
    for (int j = 0; j < ds.n_x(); ++j) {
        if (j) csv << ',';
        csv << column_name(ds.schema.predictors[j]);
    }
    for (int j = 0; j < ds.n_y(); ++j) csv << ',' << column_name(ds.schema.responses[j]);
    csv << '\n';
    for (int i = 0; i < ds.n_samples(); ++i) {
        for (int j = 0; j < ds.n_x(); ++j) {
            if (j) csv << ',';
            csv << fmt17(ds.X(i, j));
        }
        for (int j = 0; j < ds.n_y(); ++j) csv << ',' << fmt17(ds.Y(i, j));
        csv << '\n';
    }

    json meta;
    meta["predictors"] = roles_json(ds.schema.predictors);
    meta["responses"] = roles_json(ds.schema.responses);
    meta["chronological"] = ds.chronological;
    if (ds.normalization) {
        auto vec = [](const Eigen::VectorXd& v) {
            json a = json::array();
            for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
            return a;
        };
        meta["normalization"] = json{{"x_offset", vec(ds.normalization->x_offset)},
                                     {"x_scale", vec(ds.normalization->x_scale)},
                                     {"y_offset", vec(ds.normalization->y_offset)},
                                     {"y_scale", vec(ds.normalization->y_scale)}};
    }
    std::ofstream side(sidecar_path(csv_path));
    if (!side) fail("io", "cannot write schema sidecar for: " + csv_path);
    side << meta.dump(2) << '\n';
}

Dataset load_dataset(const std::string& csv_path) {
    std::ifstream side(sidecar_path(csv_path));
    if (!side) fail("io", "missing schema sidecar for: " + csv_path);
    json meta = json::parse(side);

    Dataset ds;
    for (const auto& name : meta.at("predictors"))
        ds.schema.predictors.push_back(parse_column_name(name.get<std::string>()));
    for (const auto& name : meta.at("responses"))
        ds.schema.responses.push_back(parse_column_name(name.get<std::string>()));
    ds.chronological = meta.at("chronological").get<bool>();
    if (meta.contains("normalization")) {
        auto vec = [](const json& a) {
            Eigen::VectorXd v(a.size());
            for (size_t i = 0; i < a.size(); ++i) v(static_cast<int>(i)) = a[i].get<double>();
            return v;
        };
        Normalization n;
        n.x_offset = vec(meta["normalization"]["x_offset"]);
        n.x_scale = vec(meta["normalization"]["x_scale"]);
        n.y_offset = vec(meta["normalization"]["y_offset"]);
        n.y_scale = vec(meta["normalization"]["y_scale"]);
        ds.normalization = std::move(n);
    }

    std::ifstream csv(csv_path);
    if (!csv) fail("io", "cannot open dataset: " + csv_path);
    std::string line;
    if (!std::getline(csv, line)) fail("io", "empty dataset file: " + csv_path);
    std::vector<std::vector<double>> rows;
    while (std::getline(csv, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        rows.push_back(std::move(row));
    }
    const int n_x = ds.schema.n_x(), n_y = ds.schema.n_y();
    ds.X.resize(rows.size(), n_x);
    ds.Y.resize(rows.size(), n_y);
    for (size_t i = 0; i < rows.size(); ++i) {
        if (static_cast<int>(rows[i].size()) != n_x + n_y)
            fail("io", "dataset row width mismatch at row " + std::to_string(i + 1));
        for (int j = 0; j < n_x; ++j) ds.X(static_cast<int>(i), j) = rows[i][j];
        for (int j = 0; j < n_y; ++j) ds.Y(static_cast<int>(i), j) = rows[i][n_x + j];
    }
    return ds;
}

Dataset scale_rows(const Dataset& ds, const Eigen::VectorXd& weights) {
    if (weights.size() != ds.n_samples())
        fail("invalid-argument", "weight vector length mismatch");
    Dataset out = ds;
    for (int i = 0; i < ds.n_samples(); ++i) {
        if (weights(i) < 0.0) fail("invalid-argument", "negative row weight");
        const double s = std::sqrt(weights(i));
        out.X.row(i) *= s;
        out.Y.row(i) *= s;
    }
    return out;
}

} // namespace dpfl
