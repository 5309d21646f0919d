#include <doctest.h>

#include "dpfl/error.hpp"
#include "dpfl/ls.hpp"
#include "fixtures.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <random>

using namespace dpfl;
using fixtures::linear_data;
using fixtures::make_dataset;

namespace {

Eigen::MatrixXd normal_equation_oracle(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y) {
    return (X.transpose() * X).inverse() * X.transpose() * Y;
}

Eigen::MatrixXd pinv_oracle(const Eigen::MatrixXd& X) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& s = svd.singularValues();
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(s.size());
    for (int i = 0; i < s.size(); ++i)
        if (s(i) > 1e-10 * s(0)) inv(i) = 1.0 / s(i);
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

} // namespace

TEST_CASE("ols recovers an exact linear relationship") {
    Eigen::MatrixXd X(3, 2), Y(3, 1);
    X << 1, 1, 1, 2, 1, 3;
    Y << 2, 4, 6;
    LinearModel m = fit_ols(make_dataset(X, Y));
    CHECK(m.beta(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(m.beta(1, 0) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("ols rejects duplicated predictor columns") {
    auto f = linear_data(10, 3, 1, 1);
    Eigen::MatrixXd X(10, 4);
    X << f.ds.X, f.ds.X.col(2);
    try {
        fit_ols(make_dataset(X, f.ds.Y));
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == "rank-deficient");
    }
}

TEST_CASE("ols matches the explicit normal-equation oracle") {
    auto f = linear_data(10, 3, 2, 2, 0.3);
    LinearModel m = fit_ols(f.ds);
    Eigen::MatrixXd ref = normal_equation_oracle(f.ds.X, f.ds.Y);
    CHECK((m.beta - ref).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("ols residuals are orthogonal to the predictors") {
    auto f = linear_data(60, 5, 3, 3, 0.4);
    LinearModel m = fit_ols(f.ds);
    const Eigen::MatrixXd g = f.ds.X.transpose() * (f.ds.Y - f.ds.X * m.beta);
    const Eigen::MatrixXd xty = f.ds.X.transpose() * f.ds.Y;
    CHECK(g.cwiseAbs().maxCoeff() < 1e-8 * xty.cwiseAbs().maxCoeff());
}

TEST_CASE("decomposed least squares equals ols on full-rank data") {
    auto f = linear_data(20, 4, 2, 4, 0.2);
    LinearModel ols = fit_ols(f.ds);
    for (auto method : {DecompositionMethod::Cod, DecompositionMethod::Svd}) {
        LinearModel m = fit_ols_decomposed(f.ds, method);
        CHECK((m.beta - ols.beta).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("decomposed least squares tolerates duplicated columns") {
    auto f = linear_data(12, 3, 1, 5, 0.1);
    Eigen::MatrixXd X(12, 4);
    X << f.ds.X, f.ds.X.col(2);
    Dataset ds = make_dataset(X, f.ds.Y);

    const Eigen::MatrixXd ref = pinv_oracle(X) * f.ds.Y; // minimum-norm solution
    LinearModel cod = fit_ols_decomposed(ds, DecompositionMethod::Cod);
    LinearModel svd = fit_ols_decomposed(ds, DecompositionMethod::Svd);
    CHECK(((X * cod.beta) - (X * ref)).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(((X * svd.beta) - (X * ref)).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(((X * svd.beta) - (X * cod.beta)).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(cod.beta.allFinite());
}

TEST_CASE("huber with a huge threshold reduces to ols") {
    auto f = linear_data(30, 4, 2, 6, 0.5);
    LinearModel ols = fit_ols(f.ds);
    HuberSpec spec;
    spec.delta = 1e6;
    LinearModel hub = fit_huber(f.ds, spec);
    CHECK((hub.beta - ols.beta).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("huber objective matches a grid-search oracle on the 1-D toy") {
    Eigen::MatrixXd X(3, 1), Y(3, 1);
    X << 0, 1, 2;
    Y << 0, 1, 10;
    Dataset ds;
    ds.X = X;
    ds.Y = Y;
    ds.schema.predictors = {VarRole{Quantity::Lift, 1, false}};
    ds.schema.responses = {VarRole{Quantity::Lift, 2, false}};

    HuberSpec spec;
    spec.delta = 0.5;
    LinearModel m = fit_huber(ds, spec);
    const Eigen::VectorXd d = Eigen::VectorXd::Constant(1, 0.5);
    const double fitted = huber_objective(X, Y, m.beta, d);

    double best = 1e300;
    for (double b = -2.0; b <= 8.0; b += 1e-4) {
        Eigen::MatrixXd beta(1, 1);
        beta << b;
        best = std::min(best, huber_objective(X, Y, beta, d));
    }
    CHECK(std::abs(fitted - best) < 1e-3);
}

TEST_CASE("huber IRLS objective is non-increasing") {
    std::mt19937_64 eng(9);
    auto f = linear_data(50, 4, 1, 9, 0.2);
    Dataset ds = f.ds;
    for (int i = 0; i < 5; ++i) ds.Y(i * 7, 0) *= 12.0; // gross errors
    std::vector<double> trace;
    fit_huber(ds, HuberSpec{}, &trace);
    for (size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] <= trace[i - 1] + 1e-9);
}

TEST_CASE("huber resists outliers better than ols on a contaminated fixture") {
    auto clean = linear_data(200, 4, 1, 10, 0.05);
    Dataset train = clean.ds;
    for (int i = 0; i < 10; ++i) train.Y(i * 19, 0) *= 15.0;
    auto test = linear_data(100, 4, 1, 11, 0.0);
    test.ds.Y = test.ds.X * clean.beta;

    LinearModel hub = fit_huber(train);
    LinearModel ols = fit_ols(train);
    const double mae_h = (hub.predict(test.ds.X) - test.ds.Y).cwiseAbs().mean();
    const double mae_o = (ols.predict(test.ds.X) - test.ds.Y).cwiseAbs().mean();
    CHECK(mae_h < mae_o);
}

TEST_CASE("gls with identity covariance equals ols") {
    auto f = linear_data(15, 3, 2, 12, 0.3);
    GLSSpec spec;
    spec.omega = Eigen::MatrixXd::Identity(15, 15);
    LinearModel gls = fit_gls(f.ds, spec);
    LinearModel ols = fit_ols(f.ds);
    CHECK((gls.beta - ols.beta).cwiseAbs().maxCoeff() < 1e-10);

    spec.omega *= 3.7; // scale cancels
    LinearModel gls2 = fit_gls(f.ds, spec);
    CHECK((gls2.beta - ols.beta).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("gls with diagonal covariance equals the row-weighted oracle") {
    auto f = linear_data(15, 3, 1, 13, 0.4);
    Eigen::VectorXd d(15);
    for (int i = 0; i < 15; ++i) d(i) = 0.5 + 0.1 * i;
    GLSSpec spec;
    spec.omega = d.asDiagonal();
    LinearModel gls = fit_gls(f.ds, spec);

    const Eigen::MatrixXd W = d.cwiseInverse().asDiagonal();
    const Eigen::MatrixXd ref = (f.ds.X.transpose() * W * f.ds.X).inverse() *
                                f.ds.X.transpose() * W * f.ds.Y;
    CHECK((gls.beta - ref).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("gls rejects a non-spd covariance") {
    auto f = linear_data(6, 2, 1, 14);
    GLSSpec spec;
    spec.omega = -Eigen::MatrixXd::Identity(6, 6);
    CHECK_THROWS_AS(fit_gls(f.ds, spec), Error);
}

TEST_CASE("tls recovers exact linear data") {
    auto f = linear_data(40, 4, 2, 15);
    LinearModel m = fit_tls(f.ds);
    CHECK((m.beta - f.beta).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("tls single-response closed form agrees with the block solution") {
    auto f = linear_data(60, 4, 1, 16, 0.0);
    // equal noise on X (non-intercept) and Y
    std::mt19937_64 eng(99);
    std::normal_distribution<double> g(0.0, 0.05);
    Dataset noisy = f.ds;
    for (int i = 0; i < noisy.n_samples(); ++i) {
        for (int j = 1; j < noisy.n_x(); ++j) noisy.X(i, j) += g(eng);
        noisy.Y(i, 0) += g(eng);
    }
    LinearModel m = fit_tls(noisy);

    Eigen::MatrixXd Z(noisy.n_samples(), noisy.n_x() + 1);
    Z << noisy.X, noisy.Y;
    Eigen::BDCSVD<Eigen::MatrixXd> svd(Z);
    const double lam = svd.singularValues().minCoeff();
    const Eigen::MatrixXd lhs =
        noisy.X.transpose() * noisy.X -
        lam * lam * Eigen::MatrixXd::Identity(noisy.n_x(), noisy.n_x());
    const Eigen::MatrixXd ref = lhs.inverse() * noisy.X.transpose() * noisy.Y;
    CHECK((m.beta - ref).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("wtls with uniform weights reaches the tls objective") {
    auto f = linear_data(50, 3, 1, 17);
    std::mt19937_64 eng(100);
    std::normal_distribution<double> g(0.0, 0.04);
    Dataset noisy = f.ds;
    for (int i = 0; i < noisy.n_samples(); ++i) {
        for (int j = 0; j < noisy.n_x(); ++j) noisy.X(i, j) += g(eng);
        noisy.Y(i, 0) += g(eng);
    }
    WTLSSpec spec = WTLSSpec::uniform(noisy.n_x(), noisy.n_y(), 1.0);
    std::vector<double> trace;
    LinearModel w = fit_wtls(noisy, spec, &trace);
    LinearModel t = fit_tls(noisy);
    const double obj_w = wtls_objective(noisy, spec, w.beta);
    const double obj_t = wtls_objective(noisy, spec, t.beta);
    CHECK(obj_w <= obj_t + 1e-6 * (1.0 + std::abs(obj_t)));
    CHECK(std::abs(obj_w - obj_t) < 1e-6 * (1.0 + std::abs(obj_t)));
    for (size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] <= trace[i - 1] + 1e-10);
}

TEST_CASE("wtls on zero-noise data recovers the truth with zero objective") {
    auto f = linear_data(30, 3, 2, 18);
    WTLSSpec spec = WTLSSpec::uniform(3, 2, 0.5);
    std::vector<double> trace;
    LinearModel m = fit_wtls(f.ds, spec, &trace);
    CHECK((m.beta - f.beta).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(trace.back() < 1e-12);
}

TEST_CASE("pinned columns receive no correction") {
    auto f = linear_data(25, 3, 1, 19, 0.05);
    WTLSSpec spec = WTLSSpec::uniform(3, 1, 1.0);
    spec.sigma2(0) = 0.0; // pin the intercept
    LinearModel m = fit_wtls(f.ds, spec);
    CHECK(m.beta.allFinite());
}

TEST_CASE("clustered least squares with one cluster equals ols") {
    auto f = linear_data(25, 3, 2, 20, 0.2);
    PiecewiseLinearModel m = fit_clustered_ls(f.ds, ClusteredLsSpec{1, Clusterer::KMeans, 4});
    LinearModel ols = fit_ols(f.ds);
    CHECK(m.n_segments() == 1);
    CHECK((m.beta[0] - ols.beta).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("clustered least squares separates two linear regimes") {
    // regime A around x ~ 0, regime B around x ~ 10, different slopes
    const int n = 40;
    Eigen::MatrixXd X(2 * n, 2), Y(2 * n, 1);
    std::mt19937_64 eng(21);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < n; ++i) {
        const double xa = u(eng), xb = 10.0 + u(eng);
        X(i, 0) = 1.0;
        X(i, 1) = xa;
        Y(i, 0) = 2.0 + 3.0 * xa;
        X(n + i, 0) = 1.0;
        X(n + i, 1) = xb;
        Y(n + i, 0) = -1.0 - 0.5 * xb;
    }
    Dataset ds = make_dataset(X, Y);
    for (auto cl : {Clusterer::KMeans, Clusterer::Gmm}) {
        PiecewiseLinearModel m = fit_clustered_ls(ds, ClusteredLsSpec{2, cl, 7});
        // per-regime oracles
        LinearModel a = fit_ols(make_dataset(X.topRows(n), Y.topRows(n)));
        LinearModel b = fit_ols(make_dataset(X.bottomRows(n), Y.bottomRows(n)));
        const int seg_a = m.segment_of(X.row(0).transpose());
        const int seg_b = m.segment_of(X.row(n).transpose());
        REQUIRE(seg_a != seg_b);
        CHECK((m.beta[seg_a] - a.beta).cwiseAbs().maxCoeff() < 1e-8);
        CHECK((m.beta[seg_b] - b.beta).cwiseAbs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("one cluster per sample is underdetermined") {
    auto f = linear_data(6, 2, 1, 22);
    try {
        fit_clustered_ls(f.ds, ClusteredLsSpec{6, Clusterer::KMeans, 1});
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == "underdetermined-cluster");
    }
}

TEST_CASE("piecewise prediction picks the nearest centroid with low-index ties") {
    PiecewiseLinearModel m;
    m.beta = {Eigen::MatrixXd::Constant(1, 1, 1.0), Eigen::MatrixXd::Constant(1, 1, 2.0),
              Eigen::MatrixXd::Constant(1, 1, 3.0)};
    m.centroid = {Eigen::VectorXd::Constant(1, 0.0), Eigen::VectorXd::Constant(1, 2.0),
                  Eigen::VectorXd::Constant(1, 5.0)};

    Eigen::VectorXd x(1);
    x << 2.0; // exactly centroid 1
    CHECK(m.segment_of(x) == 1);
    x << 1.0; // equidistant from centroids 0 and 1 -> lowest index
    CHECK(m.segment_of(x) == 0);

    std::mt19937_64 eng(23);
    std::uniform_real_distribution<double> u(-1.0, 6.0);
    for (int t = 0; t < 200; ++t) {
        x << u(eng);
        int best = 0;
        double bd = 1e300;
        for (int k = 0; k < 3; ++k) {
            const double d = (x - m.centroid[k]).squaredNorm();
            if (d < bd - 1e-15) {
                bd = d;
                best = k;
            }
        }
        CHECK(m.segment_of(x) == best);
        CHECK(m.predict(x.transpose())(0, 0) ==
              doctest::Approx(m.beta[best](0, 0) * x(0)).epsilon(1e-12));
    }
}

TEST_CASE("recursive least squares with kappa 1 matches batch ols") {
    auto f = linear_data(40, 4, 2, 24, 0.3);
    Dataset head = f.ds;
    head.X = f.ds.X.topRows(10);
    head.Y = f.ds.Y.topRows(10);
    RLSState s = rls_init(head, 1.0);
    for (int i = 10; i < 40; ++i)
        rls_update(s, f.ds.X.row(i).transpose(), f.ds.Y.row(i).transpose());
    LinearModel ols = fit_ols(f.ds);
    CHECK((s.beta - ols.beta).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("an exactly satisfied sample leaves the coefficients unchanged") {
    auto f = linear_data(20, 3, 2, 25, 0.1);
    RLSState s = rls_init(f.ds, 1.0);
    Eigen::VectorXd x(3);
    x << 1.0, 0.4, -0.2;
    const Eigen::VectorXd y = s.beta.transpose() * x;
    const Eigen::MatrixXd before = s.beta;
    rls_update(s, x, y);
    CHECK((s.beta - before).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("forgetting recursion matches the exponentially weighted oracle") {
    auto f = linear_data(30, 3, 1, 26, 0.2);
    const int n0 = 8;
    Dataset head = f.ds;
    head.X = f.ds.X.topRows(n0);
    head.Y = f.ds.Y.topRows(n0);
    const double kappa = 0.5;
    RLSState s = rls_init(head, kappa);
    for (int i = n0; i < 30; ++i)
        rls_update(s, f.ds.X.row(i).transpose(), f.ds.Y.row(i).transpose());

    // weights: kappa^(updates) for the batch rows, kappa^(30-1-i) for update i
    const int updates = 30 - n0;
    Eigen::VectorXd w(30);
    for (int i = 0; i < n0; ++i) w(i) = std::pow(kappa, updates);
    for (int i = n0; i < 30; ++i) w(i) = std::pow(kappa, 30 - 1 - i);
    const Eigen::MatrixXd Xw = w.cwiseSqrt().asDiagonal() * f.ds.X;
    const Eigen::MatrixXd Yw = w.cwiseSqrt().asDiagonal() * f.ds.Y;
    const Eigen::MatrixXd ref = (Xw.transpose() * Xw).inverse() * Xw.transpose() * Yw;
    CHECK((s.beta - ref).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("rls init requires full-rank data") {
    Eigen::MatrixXd X(5, 3);
    X << 1, 2, 2, 1, 3, 3, 1, 4, 4, 1, 5, 5, 1, 6, 6;
    CHECK_THROWS_AS(rls_init(make_dataset(X, Eigen::MatrixXd::Zero(5, 1)), 1.0), Error);
}

TEST_CASE("noise-free recovery across the whole family") {
    auto f = linear_data(60, 4, 2, 27);
    const double tol = 1e-8;
    auto relerr = [&](const Eigen::MatrixXd& b) {
        return (b - f.beta).cwiseAbs().maxCoeff() / f.beta.cwiseAbs().maxCoeff();
    };
    CHECK(relerr(fit_ols(f.ds).beta) < tol);
    CHECK(relerr(fit_ols_decomposed(f.ds, DecompositionMethod::Cod).beta) < tol);
    CHECK(relerr(fit_ols_decomposed(f.ds, DecompositionMethod::Svd).beta) < tol);
    CHECK(relerr(fit_huber(f.ds).beta) < tol);
    GLSSpec gls;
    gls.omega = Eigen::MatrixXd::Identity(60, 60);
    CHECK(relerr(fit_gls(f.ds, gls).beta) < tol);
    CHECK(relerr(fit_tls(f.ds).beta) < tol);
    CHECK(relerr(fit_wtls(f.ds, WTLSSpec::uniform(4, 2, 1.0)).beta) < tol);
    CHECK(relerr(fit_clustered_ls(f.ds, ClusteredLsSpec{1, Clusterer::KMeans, 0}).beta[0]) < tol);
    CHECK(relerr(rls_init(f.ds, 1.0).beta) < tol);
}
