#include "cluster.hpp"

#include "dpfl/error.hpp"
#include "dpfl/rng.hpp"

#include <cmath>
#include <limits>

namespace dpfl::detail {

namespace {

int nearest(const Eigen::VectorXd& x, const std::vector<Eigen::VectorXd>& centers) {
    int best = 0;
    double best_d = (x - centers[0]).squaredNorm();
    for (size_t k = 1; k < centers.size(); ++k) {
        const double d = (x - centers[k]).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(k);
        }
    }
    return best;
}

} // namespace

Clustering kmeans(const Eigen::MatrixXd& X, int k, unsigned long long seed) {
    const int n = static_cast<int>(X.rows());
    if (k < 1) fail("invalid-argument", "cluster count must be at least 1");
    if (k > n) fail("underdetermined-cluster", "more clusters than samples");

    std::vector<Eigen::VectorXd> centers;
    Rng rng(derive_seed(seed, 0xC1057E2ull));
    centers.push_back(X.row(static_cast<int>(rng.index(n))).transpose());
    while (static_cast<int>(centers.size()) < k) {
        int far = 0;
        double far_d = -1.0;
        for (int i = 0; i < n; ++i) {
            double d = std::numeric_limits<double>::max();
            for (const auto& c : centers) d = std::min(d, (X.row(i).transpose() - c).squaredNorm());
            if (d > far_d) {
                far_d = d;
                far = i;
            }
        }
        centers.push_back(X.row(far).transpose());
    }

    std::vector<int> assignment(n, -1);
    for (int it = 0; it < 100; ++it) {
        bool changed = false;
        for (int i = 0; i < n; ++i) {
            const int a = nearest(X.row(i).transpose(), centers);
            if (a != assignment[i]) {
                assignment[i] = a;
                changed = true;
            }
        }
        if (!changed && it > 0) break;
        for (int c = 0; c < k; ++c) {
            Eigen::VectorXd sum = Eigen::VectorXd::Zero(X.cols());
            int count = 0;
            for (int i = 0; i < n; ++i)
                if (assignment[i] == c) {
                    sum += X.row(i).transpose();
                    ++count;
                }
            if (count > 0) centers[c] = sum / count;
        }
        if (!changed) break;
    }
    return Clustering{std::move(assignment), std::move(centers)};
}

Clustering gmm(const Eigen::MatrixXd& X, int k, unsigned long long seed) {
    const int n = static_cast<int>(X.rows());
    const int d = static_cast<int>(X.cols());
    Clustering init = kmeans(X, k, seed);

    std::vector<Eigen::VectorXd> mu = init.centroid;
    std::vector<Eigen::VectorXd> var(k, Eigen::VectorXd::Ones(d));
    Eigen::VectorXd weight = Eigen::VectorXd::Constant(k, 1.0 / k);

    // seed the variances from the kmeans partition; floor keeps constant
    // coordinates (such as the intercept) harmless
    const double floor_var = 1e-9;
    for (int c = 0; c < k; ++c) {
        Eigen::VectorXd v = Eigen::VectorXd::Zero(d);
        int count = 0;
        for (int i = 0; i < n; ++i)
            if (init.assignment[i] == c) {
                v += (X.row(i).transpose() - mu[c]).array().square().matrix();
                ++count;
            }
        var[c] = count > 0 ? (v / count).cwiseMax(floor_var) : Eigen::VectorXd::Ones(d);
        weight(c) = std::max(count, 1) / static_cast<double>(n);
    }

    Eigen::MatrixXd resp(n, k);
    double prev_ll = -std::numeric_limits<double>::max();
    for (int it = 0; it < 100; ++it) {
        // E step in log space
        double ll = 0.0;
        for (int i = 0; i < n; ++i) {
            Eigen::VectorXd logp(k);
            for (int c = 0; c < k; ++c) {
                double q = 0.0;
                for (int j = 0; j < d; ++j) {
                    const double diff = X(i, j) - mu[c](j);
                    q += diff * diff / var[c](j) + std::log(2 * M_PI * var[c](j));
                }
                logp(c) = std::log(weight(c)) - 0.5 * q;
            }
            const double m = logp.maxCoeff();
            const double lse = m + std::log((logp.array() - m).exp().sum());
            resp.row(i) = (logp.array() - lse).exp();
            ll += lse;
        }
        // M step
        for (int c = 0; c < k; ++c) {
            const double nc = resp.col(c).sum();
            if (nc < 1e-12) continue;
            mu[c] = (X.transpose() * resp.col(c)) / nc;
            Eigen::VectorXd v = Eigen::VectorXd::Zero(d);
            for (int i = 0; i < n; ++i)
                v += resp(i, c) * (X.row(i).transpose() - mu[c]).array().square().matrix();
            var[c] = (v / nc).cwiseMax(floor_var);
            weight(c) = nc / n;
        }
        if (std::abs(ll - prev_ll) < 1e-8 * (1.0 + std::abs(ll))) break;
        prev_ll = ll;
    }

    Clustering out;
    out.assignment.resize(n);
    for (int i = 0; i < n; ++i) {
        int best;
        resp.row(i).maxCoeff(&best);
        out.assignment[i] = best;
    }
    out.centroid = std::move(mu);
    return out;
}

} // namespace dpfl::detail
