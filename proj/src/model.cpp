#include "dpfl/model.hpp"
#include "dpfl/error.hpp"

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

namespace dpfl {

using nlohmann::json;

namespace {

Eigen::MatrixXd normalize_x(const Eigen::MatrixXd& X, const std::optional<Normalization>& n) {
    if (!n) return X;
    Eigen::MatrixXd out = X;
    for (int j = 0; j < out.cols(); ++j)
        out.col(j) = (out.col(j).array() - n->x_offset(j)) / n->x_scale(j);
    return out;
}

Eigen::MatrixXd denormalize_y(Eigen::MatrixXd Y, const std::optional<Normalization>& n) {
    if (!n) return Y;
    for (int j = 0; j < Y.cols(); ++j)
        Y.col(j) = Y.col(j).array() * n->y_scale(j) + n->y_offset(j);
    return Y;
}

} // namespace

Eigen::MatrixXd LinearModel::predict(const Eigen::MatrixXd& X) const {
    return denormalize_y(normalize_x(X, normalization) * beta, normalization);
}

int PiecewiseLinearModel::segment_of(const Eigen::VectorXd& x) const {
    int best = 0;
    double best_d = (x - centroid[0]).squaredNorm();
    for (int k = 1; k < n_segments(); ++k) {
        double d = (x - centroid[k]).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = k;
        }
    }
    return best;
}

Eigen::MatrixXd PiecewiseLinearModel::predict(const Eigen::MatrixXd& X) const {
    Eigen::MatrixXd Xn = normalize_x(X, normalization);
    Eigen::MatrixXd Y(X.rows(), beta[0].cols());
    for (int i = 0; i < Xn.rows(); ++i) {
        int k = segment_of(Xn.row(i).transpose());
        Y.row(i) = Xn.row(i) * beta[k];
    }
    return denormalize_y(std::move(Y), normalization);
}

double kernel_eval(const Kernel& k, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    if (a.size() != b.size()) fail("kernel", "dimension mismatch in kernel evaluation");
    switch (k.kind) {
        case KernelKind::Linear: return a.dot(b);
        case KernelKind::Polynomial: return std::pow(a.dot(b) + k.coef, k.degree);
        case KernelKind::Rbf: return std::exp(-k.gamma * (a - b).squaredNorm());
        case KernelKind::Sigmoid: return std::tanh(k.gamma * a.dot(b) + k.coef);
    }
    return 0.0;
}

Eigen::MatrixXd KernelModel::predict(const Eigen::MatrixXd& X) const {
    Eigen::MatrixXd Xn = normalize_x(X, normalization);
    Eigen::MatrixXd Y(X.rows(), dual_coefs.cols());
    for (int i = 0; i < Xn.rows(); ++i) {
        Eigen::VectorXd kv(support_x.rows());
        for (int s = 0; s < support_x.rows(); ++s)
            kv(s) = kernel_eval(kernel, support_x.row(s).transpose(), Xn.row(i).transpose());
        Y.row(i) = (dual_coefs.transpose() * kv + intercept).transpose();
    }
    return denormalize_y(std::move(Y), normalization);
}

Eigen::MatrixXd predict(const AnyModel& model, const Eigen::MatrixXd& X) {
    return std::visit([&](const auto& m) { return m.predict(X); }, model);
}

const VariableSchema& model_schema(const AnyModel& model) {
    return std::visit([](const auto& m) -> const VariableSchema& { return m.schema; }, model);
}

const std::map<std::string, std::string>& model_metadata(const AnyModel& model) {
    return std::visit(
        [](const auto& m) -> const std::map<std::string, std::string>& { return m.metadata; },
        model);
}

namespace {

json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (int i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", rows}};
}

Eigen::MatrixXd matrix_from_json(const json& j) {
    Eigen::MatrixXd m(j.at("rows").get<int>(), j.at("cols").get<int>());
    const json& data = j.at("data");
    for (int i = 0; i < m.rows(); ++i)
        for (int c = 0; c < m.cols(); ++c) m(i, c) = data[i][c].get<double>();
    return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
    json out = json::array();
    for (int i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

Eigen::VectorXd vector_from_json(const json& j) {
    Eigen::VectorXd v(j.size());
    for (size_t i = 0; i < j.size(); ++i) v(static_cast<int>(i)) = j[i].get<double>();
    return v;
}

json roles_to_json(const std::vector<VarRole>& roles) {
    json out = json::array();
    for (const auto& r : roles) out.push_back(column_name(r));
    return out;
}

std::vector<VarRole> roles_from_json(const json& j) {
    std::vector<VarRole> out;
    for (const auto& name : j) out.push_back(parse_column_name(name.get<std::string>()));
    return out;
}

json schema_to_json(const VariableSchema& s) {
    json out{{"predictors", roles_to_json(s.predictors)},
             {"responses", roles_to_json(s.responses)}};
    if (s.transform.kind != TransformSpec::Kind::None) {
        json t;
        switch (s.transform.kind) {
            case TransformSpec::Kind::VoltageSquare: t["kind"] = "voltage_square"; break;
            case TransformSpec::Kind::VaCoupling: t["kind"] = "va_coupling"; break;
            case TransformSpec::Kind::DimensionLift: t["kind"] = "dimension_lift"; break;
            default: break;
        }
        if (s.transform.kind == TransformSpec::Kind::DimensionLift) {
            t["f_lift"] = s.transform.f_lift == LiftFunction::RadialExponential
                              ? "radial_exponential"
                              : "log_radial";
            t["gamma"] = s.transform.gamma;
            t["bases"] = matrix_to_json(s.transform.bases);
        }
        out["transform"] = std::move(t);
    }
    return out;
}

VariableSchema schema_from_json(const json& j) {
    VariableSchema s;
    s.predictors = roles_from_json(j.at("predictors"));
    s.responses = roles_from_json(j.at("responses"));
    if (j.contains("transform")) {
        const json& t = j.at("transform");
        std::string kind = t.at("kind").get<std::string>();
        if (kind == "voltage_square") s.transform.kind = TransformSpec::Kind::VoltageSquare;
        else if (kind == "va_coupling") s.transform.kind = TransformSpec::Kind::VaCoupling;
        else if (kind == "dimension_lift") s.transform.kind = TransformSpec::Kind::DimensionLift;
        else fail("schema", "unknown transform kind: " + kind);
        if (s.transform.kind == TransformSpec::Kind::DimensionLift) {
            s.transform.f_lift = t.at("f_lift").get<std::string>() == "log_radial"
                                     ? LiftFunction::LogRadial
                                     : LiftFunction::RadialExponential;
            s.transform.gamma = t.at("gamma").get<double>();
            s.transform.bases = matrix_from_json(t.at("bases"));
            s.transform.n_lift = static_cast<int>(s.transform.bases.rows());
        }
    }
    return s;
}

json normalization_to_json(const Normalization& n) {
    return json{{"x_offset", vector_to_json(n.x_offset)},
                {"x_scale", vector_to_json(n.x_scale)},
                {"y_offset", vector_to_json(n.y_offset)},
                {"y_scale", vector_to_json(n.y_scale)}};
}

Normalization normalization_from_json(const json& j) {
    Normalization n;
    n.x_offset = vector_from_json(j.at("x_offset"));
    n.x_scale = vector_from_json(j.at("x_scale"));
    n.y_offset = vector_from_json(j.at("y_offset"));
    n.y_scale = vector_from_json(j.at("y_scale"));
    return n;
}

json common_to_json(const VariableSchema& schema, const std::optional<Normalization>& norm,
                    const std::map<std::string, std::string>& metadata) {
    json out{{"schema", schema_to_json(schema)}, {"metadata", metadata}};
    if (norm) out["normalization"] = normalization_to_json(*norm);
    return out;
}

const char* kernel_tag(KernelKind k) {
    switch (k) {
        case KernelKind::Linear: return "linear";
        case KernelKind::Polynomial: return "polynomial";
        case KernelKind::Rbf: return "rbf";
        case KernelKind::Sigmoid: return "sigmoid";
    }
    return "?";
}

KernelKind kernel_from_tag(const std::string& s) {
    if (s == "linear") return KernelKind::Linear;
    if (s == "polynomial") return KernelKind::Polynomial;
    if (s == "rbf") return KernelKind::Rbf;
    if (s == "sigmoid") return KernelKind::Sigmoid;
    fail("model-io", "unknown kernel: " + s);
}

} // namespace

std::string save_model_json(const AnyModel& model) {
    json out;
    if (const auto* lm = std::get_if<LinearModel>(&model)) {
        out = common_to_json(lm->schema, lm->normalization, lm->metadata);
        out["shape"] = "linear";
        out["beta"] = matrix_to_json(lm->beta);
    } else if (const auto* pm = std::get_if<PiecewiseLinearModel>(&model)) {
        out = common_to_json(pm->schema, pm->normalization, pm->metadata);
        out["shape"] = "piecewise";
        json segs = json::array();
        for (int k = 0; k < pm->n_segments(); ++k)
            segs.push_back(json{{"beta", matrix_to_json(pm->beta[k])},
                                {"centroid", vector_to_json(pm->centroid[k])}});
        out["segments"] = std::move(segs);
    } else {
        const auto& km = std::get<KernelModel>(model);
        out = common_to_json(km.schema, km.normalization, km.metadata);
        out["shape"] = "kernel";
        out["kernel"] = json{{"kind", kernel_tag(km.kernel.kind)},
                             {"gamma", km.kernel.gamma},
                             {"coef", km.kernel.coef},
                             {"degree", km.kernel.degree}};
        out["support_x"] = matrix_to_json(km.support_x);
        out["dual_coefs"] = matrix_to_json(km.dual_coefs);
        out["intercept"] = vector_to_json(km.intercept);
    }
    return out.dump(2);
}

AnyModel load_model_json(const std::string& text) {
    json j = json::parse(text);
    std::string shape = j.at("shape").get<std::string>();
    VariableSchema schema = schema_from_json(j.at("schema"));
    std::optional<Normalization> norm;
    if (j.contains("normalization")) norm = normalization_from_json(j.at("normalization"));
    std::map<std::string, std::string> metadata =
        j.at("metadata").get<std::map<std::string, std::string>>();
    if (shape == "linear") {
        LinearModel m;
        m.beta = matrix_from_json(j.at("beta"));
        m.schema = std::move(schema);
        m.normalization = std::move(norm);
        m.metadata = std::move(metadata);
        return m;
    }
    if (shape == "piecewise") {
        PiecewiseLinearModel m;
        for (const auto& seg : j.at("segments")) {
            m.beta.push_back(matrix_from_json(seg.at("beta")));
            m.centroid.push_back(vector_from_json(seg.at("centroid")));
        }
        m.schema = std::move(schema);
        m.normalization = std::move(norm);
        m.metadata = std::move(metadata);
        return m;
    }
    if (shape == "kernel") {
        KernelModel m;
        const json& k = j.at("kernel");
        m.kernel.kind = kernel_from_tag(k.at("kind").get<std::string>());
        m.kernel.gamma = k.at("gamma").get<double>();
        m.kernel.coef = k.at("coef").get<double>();
        m.kernel.degree = k.at("degree").get<int>();
        m.support_x = matrix_from_json(j.at("support_x"));
        m.dual_coefs = matrix_from_json(j.at("dual_coefs"));
        m.intercept = vector_from_json(j.at("intercept"));
        m.schema = std::move(schema);
        m.normalization = std::move(norm);
        m.metadata = std::move(metadata);
        return m;
    }
    fail("model-io", "unknown model shape: " + shape);
}

void save_model_file(const AnyModel& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) fail("io", "cannot write model file: " + path);
    out << save_model_json(model);
}

AnyModel load_model_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("io", "cannot open model file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return load_model_json(ss.str());
}

} // namespace dpfl
