#include "dpfl/ls.hpp"
#include "dpfl/error.hpp"

#include "cluster.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

namespace dpfl {

namespace {

void stamp(LinearModel& m, const Dataset& ds, const std::string& trainer) {
    m.schema = ds.schema;
    m.normalization = ds.normalization;
    m.metadata["trainer"] = trainer;
}

Eigen::MatrixXd solve_ols(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                          const std::string& who) {
    if (!has_full_column_rank(X))
        fail("rank-deficient", who + ": predictor matrix is rank deficient");
    return X.colPivHouseholderQr().solve(Y);
}

double median_of(std::vector<double> v) {
    const size_t n = v.size();
    std::nth_element(v.begin(), v.begin() + n / 2, v.end());
    double hi = v[n / 2];
    if (n % 2 == 1) return hi;
    std::nth_element(v.begin(), v.begin() + n / 2 - 1, v.end());
    return 0.5 * (v[n / 2 - 1] + hi);
}

} // namespace

LinearModel fit_ols(const Dataset& ds) {
    LinearModel m;
    m.beta = solve_ols(ds.X, ds.Y, "fit_ols");
    stamp(m, ds, "ols");
    return m;
}

LinearModel fit_ols_decomposed(const Dataset& ds, DecompositionMethod method) {
    const Eigen::MatrixXd XtX = ds.X.transpose() * ds.X;
    const Eigen::MatrixXd XtY = ds.X.transpose() * ds.Y;
    LinearModel m;
    if (method == DecompositionMethod::Cod) {
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(XtX);
        cod.setThreshold(1e-10);
        m.beta = cod.solve(XtY);
    } else {
        Eigen::BDCSVD<Eigen::MatrixXd> svd(XtX, Eigen::ComputeThinU | Eigen::ComputeThinV);
        svd.setThreshold(1e-10);
        m.beta = svd.solve(XtY);
    }
    stamp(m, ds, method == DecompositionMethod::Cod ? "ols_cod" : "ols_svd");
    return m;
}

double huber_objective(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                       const Eigen::MatrixXd& beta, const Eigen::VectorXd& delta) {
    const Eigen::MatrixXd E = Y - X * beta;
    double obj = 0.0;
    for (int j = 0; j < E.cols(); ++j) {
        const double d = delta(j);
        for (int i = 0; i < E.rows(); ++i) {
            const double a = std::abs(E(i, j));
            obj += a <= d ? a * a : d * (2.0 * a - d);
        }
    }
    return obj;
}

LinearModel fit_huber(const Dataset& ds, const HuberSpec& spec,
                      std::vector<double>* objective_trace) {
    const Eigen::MatrixXd& X = ds.X;
    const Eigen::MatrixXd& Y = ds.Y;
    const int n = ds.n_samples(), n_y = ds.n_y();

    Eigen::MatrixXd beta = solve_ols(X, Y, "fit_huber");

    Eigen::VectorXd delta(n_y);
    if (spec.delta) {
        if (*spec.delta <= 0.0) fail("invalid-argument", "Huber threshold must be positive");
        delta.setConstant(*spec.delta);
    } else {
        const Eigen::MatrixXd E = Y - X * beta;
        for (int j = 0; j < n_y; ++j) {
            std::vector<double> r(E.col(j).data(), E.col(j).data() + n);
            const double med = median_of(r);
            for (double& v : r) v = std::abs(v - med);
            const double mad = median_of(r);
            delta(j) = std::max(1.345 * mad / 0.6745, 1e-12);
        }
    }

    if (objective_trace) objective_trace->push_back(huber_objective(X, Y, beta, delta));

    for (int it = 0; it < spec.max_iterations; ++it) {
        Eigen::MatrixXd next(beta.rows(), beta.cols());
        for (int j = 0; j < n_y; ++j) {
            const Eigen::VectorXd e = Y.col(j) - X * beta.col(j);
            Eigen::VectorXd w(n);
            for (int i = 0; i < n; ++i) {
                const double a = std::abs(e(i));
                w(i) = a <= delta(j) ? 1.0 : delta(j) / a;
            }
            const Eigen::VectorXd sw = w.cwiseSqrt();
            const Eigen::MatrixXd Xw = sw.asDiagonal() * X;
            if (!has_full_column_rank(Xw))
                fail("rank-deficient", "fit_huber: weighted system lost rank");
            next.col(j) = Xw.colPivHouseholderQr().solve(sw.asDiagonal() * Y.col(j));
        }
        const double change = (next - beta).cwiseAbs().maxCoeff();
        beta = std::move(next);
        if (objective_trace) objective_trace->push_back(huber_objective(X, Y, beta, delta));
        if (change < spec.tol) {
            LinearModel m;
            m.beta = std::move(beta);
            stamp(m, ds, "huber");
            return m;
        }
    }
    fail("non-convergence", "fit_huber: IRLS did not converge");
}

LinearModel fit_gls(const Dataset& ds, const GLSSpec& spec) {
    if (spec.omega.rows() != ds.n_samples() || spec.omega.cols() != ds.n_samples())
        fail("invalid-argument", "fit_gls: Omega must be N_s x N_s");
    Eigen::LLT<Eigen::MatrixXd> llt(spec.omega);
    if (llt.info() != Eigen::Success)
        fail("not-spd", "fit_gls: Omega is not symmetric positive definite");
    const Eigen::MatrixXd L = llt.matrixL();
    const Eigen::MatrixXd Xw = L.triangularView<Eigen::Lower>().solve(ds.X);
    const Eigen::MatrixXd Yw = L.triangularView<Eigen::Lower>().solve(ds.Y);
    LinearModel m;
    m.beta = solve_ols(Xw, Yw, "fit_gls");
    stamp(m, ds, "gls");
    return m;
}

LinearModel fit_tls(const Dataset& ds) {
    const int n_x = ds.n_x(), n_y = ds.n_y();
    Eigen::MatrixXd Z(ds.n_samples(), n_x + n_y);
    Z << ds.X, ds.Y;
    Eigen::BDCSVD<Eigen::MatrixXd> svd(Z, Eigen::ComputeFullV);
    const Eigen::MatrixXd& V = svd.matrixV();
    const Eigen::MatrixXd Vxy = V.block(0, n_x, n_x, n_y);
    const Eigen::MatrixXd Vyy = V.block(n_x, n_x, n_y, n_y);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(Vyy);
    if (!lu.isInvertible()) fail("singular", "fit_tls: V_yy block is singular");
    LinearModel m;
    m.beta = -Vxy * lu.inverse();
    stamp(m, ds, "tls");
    return m;
}

WTLSSpec WTLSSpec::uniform(int n_x, int n_y, double s2) {
    WTLSSpec spec;
    spec.sigma2 = Eigen::VectorXd::Constant(n_x + n_y, s2);
    return spec;
}

namespace {

struct WtlsWork {
    std::vector<int> free_cols;   ///< perturbable predictor columns
    Eigen::VectorXd inv_sx;       ///< 1/sigma2 on free predictor columns
    Eigen::VectorXd inv_sy;       ///< 1/sigma2 on response columns
};

WtlsWork wtls_setup(const Dataset& ds, const WTLSSpec& spec) {
    const int n_x = ds.n_x(), n_y = ds.n_y();
    if (spec.sigma2.size() != n_x + n_y)
        fail("invalid-argument", "fit_wtls: sigma2 must have N_x + N_y entries");
    WtlsWork w;
    for (int j = 0; j < n_x; ++j) {
        if (spec.sigma2(j) < 0.0) fail("invalid-argument", "fit_wtls: negative variance");
        if (spec.sigma2(j) > 0.0) w.free_cols.push_back(j);
    }
    w.inv_sx.resize(w.free_cols.size());
    for (size_t k = 0; k < w.free_cols.size(); ++k) w.inv_sx(k) = 1.0 / spec.sigma2(w.free_cols[k]);
    w.inv_sy.resize(n_y);
    for (int j = 0; j < n_y; ++j) {
        if (spec.sigma2(n_x + j) <= 0.0)
            fail("invalid-argument", "fit_wtls: response variances must be positive");
        w.inv_sy(j) = 1.0 / spec.sigma2(n_x + j);
    }
    return w;
}

/// Optimal corrections for fixed beta; returns the objective and fills dX.
double wtls_correct(const Dataset& ds, const WtlsWork& w, const Eigen::MatrixXd& beta,
                    Eigen::MatrixXd& dX) {
    const int n = ds.n_samples();
    const int nf = static_cast<int>(w.free_cols.size());
    dX = Eigen::MatrixXd::Zero(n, ds.n_x());

    Eigen::MatrixXd Bf(nf, beta.cols());
    for (int k = 0; k < nf; ++k) Bf.row(k) = beta.row(w.free_cols[k]);
    const Eigen::MatrixXd A =
        Eigen::MatrixXd(w.inv_sx.asDiagonal()) + Bf * w.inv_sy.asDiagonal() * Bf.transpose();
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() != Eigen::Success) fail("singular", "fit_wtls: correction system not SPD");

    double obj = 0.0;
    for (int i = 0; i < n; ++i) {
        const Eigen::VectorXd r = beta.transpose() * ds.X.row(i).transpose() -
                                  ds.Y.row(i).transpose();
        Eigen::VectorXd delta(nf);
        if (nf > 0) {
            delta = llt.solve(-Bf * w.inv_sy.asDiagonal() * r);
            for (int k = 0; k < nf; ++k) dX(i, w.free_cols[k]) = delta(k);
            obj += delta.dot(w.inv_sx.asDiagonal() * delta);
        }
        const Eigen::VectorXd rt = r + (nf > 0 ? Bf.transpose() * delta
                                               : Eigen::VectorXd::Zero(r.size()));
        obj += rt.dot(w.inv_sy.asDiagonal() * rt);
    }
    return obj;
}

} // namespace

double wtls_objective(const Dataset& ds, const WTLSSpec& spec, const Eigen::MatrixXd& beta) {
    WtlsWork w = wtls_setup(ds, spec);
    Eigen::MatrixXd dX;
    return wtls_correct(ds, w, beta, dX);
}

LinearModel fit_wtls(const Dataset& ds, const WTLSSpec& spec,
                     std::vector<double>* objective_trace) {
    WtlsWork w = wtls_setup(ds, spec);
    Eigen::MatrixXd beta = solve_ols(ds.X, ds.Y, "fit_wtls");
    Eigen::MatrixXd dX;
    double obj = wtls_correct(ds, w, beta, dX);
    if (objective_trace) objective_trace->push_back(obj);

    for (int it = 0; it < spec.max_iterations; ++it) {
        const Eigen::MatrixXd Xc = ds.X + dX;
        if (!has_full_column_rank(Xc))
            fail("rank-deficient", "fit_wtls: corrected predictors lost rank");
        beta = Xc.colPivHouseholderQr().solve(ds.Y);
        const double next = wtls_correct(ds, w, beta, dX);
        if (objective_trace) objective_trace->push_back(next);
        const bool done = std::abs(obj - next) <= spec.tol * (1.0 + std::abs(next));
        obj = next;
        if (done) {
            LinearModel m;
            m.beta = std::move(beta);
            stamp(m, ds, "wtls");
            return m;
        }
    }
    fail("non-convergence", "fit_wtls: alternating minimization did not converge");
}

PiecewiseLinearModel fit_clustered_ls(const Dataset& ds, const ClusteredLsSpec& spec) {
    if (spec.k < 1) fail("invalid-argument", "cluster count must be at least 1");
    detail::Clustering cl = spec.clusterer == Clusterer::KMeans
                                ? detail::kmeans(ds.X, spec.k, spec.seed)
                                : detail::gmm(ds.X, spec.k, spec.seed);

    PiecewiseLinearModel m;
    for (int c = 0; c < spec.k; ++c) {
        std::vector<int> rows;
        for (int i = 0; i < ds.n_samples(); ++i)
            if (cl.assignment[i] == c) rows.push_back(i);
        if (static_cast<int>(rows.size()) < ds.n_x())
            fail("underdetermined-cluster",
                 "cluster " + std::to_string(c) + " holds " + std::to_string(rows.size()) +
                     " samples for " + std::to_string(ds.n_x()) + " predictors");
        Eigen::MatrixXd Xc(rows.size(), ds.n_x()), Yc(rows.size(), ds.n_y());
        for (size_t i = 0; i < rows.size(); ++i) {
            Xc.row(i) = ds.X.row(rows[i]);
            Yc.row(i) = ds.Y.row(rows[i]);
        }
        m.beta.push_back(solve_ols(Xc, Yc, "fit_clustered_ls"));
        m.centroid.push_back(cl.centroid[c]);
    }
    m.schema = ds.schema;
    m.normalization = ds.normalization;
    m.metadata["trainer"] = spec.clusterer == Clusterer::KMeans ? "cls_ls" : "cls_ls_gmm";
    m.metadata["k"] = std::to_string(spec.k);
    return m;
}

LinearModel RLSState::model() const {
    LinearModel m;
    m.beta = beta;
    m.schema = schema;
    m.normalization = normalization;
    m.metadata["trainer"] = "rls";
    return m;
}

RLSState rls_init(const Dataset& ds, double kappa) {
    if (kappa <= 0.0 || kappa > 1.0) fail("invalid-argument", "kappa must lie in (0, 1]");
    if (!has_full_column_rank(ds.X))
        fail("rank-deficient", "rls_init: predictor matrix is rank deficient");
    RLSState s;
    const Eigen::MatrixXd XtX = ds.X.transpose() * ds.X;
    Eigen::LLT<Eigen::MatrixXd> llt(XtX);
    if (llt.info() != Eigen::Success) fail("rank-deficient", "rls_init: X^T X not invertible");
    s.P = llt.solve(Eigen::MatrixXd::Identity(ds.n_x(), ds.n_x()));
    s.beta = llt.solve(ds.X.transpose() * ds.Y);
    s.kappa = kappa;
    s.schema = ds.schema;
    s.normalization = ds.normalization;
    return s;
}

void rls_update(RLSState& s, const Eigen::VectorXd& x_new, const Eigen::VectorXd& y_new) {
    if (x_new.size() != s.beta.rows() || y_new.size() != s.beta.cols())
        fail("invalid-argument", "rls_update: dimension mismatch");
    const Eigen::VectorXd Px = s.P * x_new;
    const Eigen::VectorXd gain = Px / (s.kappa + x_new.dot(Px));
    s.beta += gain * (y_new.transpose() - x_new.transpose() * s.beta);
    s.P = (s.P - gain * Px.transpose()) / s.kappa;
    s.P = 0.5 * (s.P + s.P.transpose());
}

} // namespace dpfl
