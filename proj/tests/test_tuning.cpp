#include <cointlasso/dgp.hpp>
#include <cointlasso/estimator.hpp>
#include <cointlasso/tuning.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <random>

using namespace cointlasso;
using Catch::Approx;

namespace {

Dataset random_dataset(int t, int n1, int n2, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    Dataset d;
    d.x.resize(t, n1);
    d.z.resize(t, n2);
    d.y.resize(t);
    for (int i = 0; i < t; ++i) {
        for (int j = 0; j < n1; ++j) d.x(i, j) = g(rng);
        for (int j = 0; j < n2; ++j) d.z(i, j) = g(rng);
        d.y[i] = g(rng);
    }
    return d;
}

// T x T hat-matrix route, the independent evaluation order.
double trace_hat_tt(const MatrixXd& w, const VectorXd& diag) {
    MatrixXd penalized = w.transpose() * w;
    penalized.diagonal() += diag;
    const MatrixXd hat = w * penalized.ldlt().solve(w.transpose());
    return hat.trace();
}

}  // namespace

TEST_CASE("effective_params_ridge matches the SVD formula") {
    const Dataset d = random_dataset(6, 2, 1, 31);
    const double got = effective_params_ridge(d, 1.0);
    const Eigen::JacobiSVD<MatrixXd> svd(d.design());
    double expected = 0.0;
    for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i) {
        const double s2 = svd.singularValues()[i] * svd.singularValues()[i];
        expected += s2 / (s2 + 1.0);
    }
    REQUIRE(got == Approx(expected).epsilon(1e-8));
}

TEST_CASE("effective_params_ridge limits") {
    const Dataset d = random_dataset(30, 3, 2, 5);
    REQUIRE(effective_params_ridge(d, 0.0) == Approx(5.0));
    REQUIRE(effective_params_ridge(d, 1e14) < 1e-6);
}

TEST_CASE("effective params decrease strictly in lambda") {
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        const Dataset d = random_dataset(25, 3, 3, seed);
        double prev = effective_params_ridge(d, 0.1);
        for (double lambda : {1.0, 10.0, 100.0, 1000.0}) {
            const double cur = effective_params_ridge(d, lambda);
            REQUIRE(cur < prev);
            prev = cur;
        }
    }
}

TEST_CASE("trace identity: both evaluation orders agree") {
    const Dataset d = random_dataset(20, 3, 2, 77);
    const MatrixXd w = d.design();
    VectorXd diag(5);
    diag << 0.5, 1.0, 2.0, 4.0, 8.0;
    detail::GcvWorkspace ws(d);
    const auto eval = ws.evaluate(diag);
    REQUIRE(eval.ok);
    REQUIRE(eval.effective_params == Approx(trace_hat_tt(w, diag)).epsilon(1e-8));
}

TEST_CASE("gcv_ridge against a from-scratch evaluation") {
    const Dataset d = random_dataset(15, 2, 2, 201);
    const double lambda = 2.5;
    const double got = gcv_ridge(d, lambda);

    const MatrixXd w = d.design();
    MatrixXd penalized = w.transpose() * w;
    penalized.diagonal().array() += lambda;
    const VectorXd theta = penalized.ldlt().solve(w.transpose() * d.y);
    const double rss = (d.y - w * theta).squaredNorm();
    const double e = trace_hat_tt(w, VectorXd::Constant(4, lambda));
    const double t = 15.0;
    REQUIRE(got == Approx((rss / t) / ((1 - e / t) * (1 - e / t))).epsilon(1e-8));
}

TEST_CASE("gcv_ridge limits and well-posedness") {
    const Dataset d = random_dataset(30, 2, 2, 11);
    for (double lambda : {0.1, 1.0, 10.0}) {
        const double v = gcv_ridge(d, lambda);
        REQUIRE(std::isfinite(v));
        REQUIRE(v > 0.0);
    }
    REQUIRE(gcv_ridge(d, 1e16) == Approx(d.y.squaredNorm() / 30.0).epsilon(1e-4));
}

TEST_CASE("select_ridge matches a brute-force scan and breaks ties upward") {
    const Dataset d = random_dataset(50, 5, 5, 88);
    GcvGrid grid = default_gcv_grid(5, 5, 50);
    const double chosen = select_ridge(d, grid);
    double best = std::numeric_limits<double>::infinity();
    double arg = 0.0;
    for (double lambda : grid.ridge_grid) {
        const double v = gcv_ridge(d, lambda);
        if (v < best || (v == best && lambda > arg)) {
            best = v;
            arg = lambda;
        }
    }
    REQUIRE(chosen == arg);

    // W = 0 makes every grid point tie: the largest lambda wins
    Dataset flat = d;
    flat.x.setZero();
    flat.z.setZero();
    REQUIRE(select_ridge(flat, grid) == grid.ridge_grid.back());
}

TEST_CASE("gcv_adalasso at zero lambdas reduces to the unpenalized solve") {
    const Dataset d = random_dataset(30, 2, 2, 61);
    const VectorXd theta0 = ridge_fit(d, 0.5);
    const double got = gcv_adalasso(d, theta0, 0.0, 0.0, 0.9, 1e-6);
    const MatrixXd w = d.design();
    const VectorXd ols = w.householderQr().solve(d.y);
    const double rss = (d.y - w * ols).squaredNorm();
    const double t = 30.0;
    const double e = 4.0;  // full rank
    REQUIRE(got == Approx((rss / t) / ((1 - e / t) * (1 - e / t))).epsilon(1e-6));

    REQUIRE(gcv_adalasso(d, theta0, 1e14, 1e14, 0.9, 1e-6) ==
            Approx(d.y.squaredNorm() / t).epsilon(1e-4));
}

TEST_CASE("gcv_adalasso matches the independent evaluation chain") {
    const Dataset d = random_dataset(20, 2, 2, 303);
    const VectorXd theta0 = ridge_fit(d, 1.0);
    const double rho = 0.9, epsilon = 1e-4;
    const double lambda1 = 3.0, lambda2 = 7.0;
    const double got = gcv_adalasso(d, theta0, lambda1, lambda2, rho, epsilon);

    // step-by-step re-computation: weights -> E -> solve -> trace -> ratio
    VectorXd weights(4), e_diag(4);
    for (int j = 0; j < 4; ++j) {
        const double mag = std::max(std::abs(theta0[j]), epsilon);
        weights[j] = std::min(std::pow(mag, -rho), 1e8);
        e_diag[j] = (j < 2 ? lambda1 : lambda2) * weights[j] / (std::abs(theta0[j]) + epsilon);
    }
    const MatrixXd w = d.design();
    MatrixXd penalized = w.transpose() * w;
    penalized.diagonal() += e_diag;
    const VectorXd theta = penalized.ldlt().solve(w.transpose() * d.y);
    const double rss = (d.y - w * theta).squaredNorm();
    const double e = trace_hat_tt(w, e_diag);
    const double t = 20.0;
    REQUIRE(got == Approx((rss / t) / ((1 - e / t) * (1 - e / t))).epsilon(1e-8));
}

TEST_CASE("over-parameterized cells are excluded, not fatal") {
    const Dataset d = random_dataset(4, 3, 3, 15);  // n = 6 > T = 4
    const VectorXd theta0 = ridge_fit(d, 1.0);
    REQUIRE(!std::isfinite(gcv_adalasso(d, theta0, 0.0, 0.0, 0.9, 1e-6)));
    GcvGrid grid;
    grid.ridge_grid = {1.0, 10.0};
    grid.lambda1_grid = {1e-12, 10.0};
    grid.lambda2_grid = {1e-12, 10.0};
    const LambdaSelection sel = select_lambdas(d, grid);
    REQUIRE(std::isfinite(sel.gcv));
    REQUIRE(sel.surface.size() == 4);
}

TEST_CASE("select_lambdas matches a brute re-scan of its own surface") {
    const Dataset d = simulate(builtin_model(1), 80, 0, 64);
    GcvGrid grid = default_gcv_grid(15, 15, 80);
    grid.lambda1_grid = log_spaced(0.1 * 80, 10.0 * 80, 5);
    grid.lambda2_grid = log_spaced(0.1 * std::sqrt(80.0), 10.0 * std::sqrt(80.0), 5);
    const LambdaSelection sel = select_lambdas(d, grid);
    REQUIRE(sel.surface.size() == 25);

    double best = std::numeric_limits<double>::infinity();
    double l1 = 0, l2 = 0;
    for (const auto& cell : sel.surface) {
        if (!std::isfinite(cell.gcv)) continue;
        const bool better = cell.gcv < best ||
                            (cell.gcv == best && cell.lambda1 + cell.lambda2 > l1 + l2);
        if (better) {
            best = cell.gcv;
            l1 = cell.lambda1;
            l2 = cell.lambda2;
        }
    }
    REQUIRE(sel.lambda1 == l1);
    REQUIRE(sel.lambda2 == l2);
    REQUIRE(sel.gcv == best);

    // per-cell values agree with standalone gcv_adalasso at the same inputs
    const double epsilon = default_epsilon(d.y);
    for (std::size_t k = 0; k < sel.surface.size(); k += 7) {
        const auto& cell = sel.surface[k];
        const double v =
            gcv_adalasso(d, sel.theta0, cell.lambda1, cell.lambda2, grid.rho, epsilon);
        if (std::isfinite(cell.gcv))
            REQUIRE(v == Approx(cell.gcv).epsilon(1e-12));
        else
            REQUIRE(!std::isfinite(v));
    }

    // deterministic: a second call reproduces the selection exactly
    const LambdaSelection again = select_lambdas(d, grid);
    REQUIRE(again.lambda1 == sel.lambda1);
    REQUIRE(again.lambda2 == sel.lambda2);
    REQUIRE(again.gcv == sel.gcv);
}

TEST_CASE("select_lambdas tie rule prefers the larger sum") {
    Dataset flat = random_dataset(20, 2, 2, 5);
    flat.x.setZero();
    flat.z.setZero();
    GcvGrid grid;
    grid.ridge_grid = {1.0};
    grid.lambda1_grid = {1.0, 2.0};
    grid.lambda2_grid = {1.0, 3.0};
    const LambdaSelection sel = select_lambdas(flat, grid);
    REQUIRE(sel.lambda1 == 2.0);
    REQUIRE(sel.lambda2 == 3.0);
}

TEST_CASE("grid validation") {
    GcvGrid grid;
    REQUIRE_THROWS_AS(grid.validate(), std::invalid_argument);
    grid.ridge_grid = {1.0, 2.0};
    grid.lambda1_grid = {1.0, 1.0};  // not strictly ascending
    grid.lambda2_grid = {1.0};
    REQUIRE_THROWS_AS(grid.validate(), std::invalid_argument);
    grid.lambda1_grid = {1.0, 2.0};
    REQUIRE_NOTHROW(grid.validate());
    grid.ridge_grid = {0.0, 1.0};
    REQUIRE_THROWS_AS(grid.validate(), std::invalid_argument);

    REQUIRE_THROWS_AS(log_spaced(1.0, 0.5, 3), std::invalid_argument);
    const auto pts = log_spaced(0.01, 100.0, 5);
    REQUIRE(pts.size() == 5);
    REQUIRE(pts.front() == Approx(0.01));
    REQUIRE(pts.back() == Approx(100.0));
    REQUIRE(pts[2] == Approx(1.0));

    const GcvGrid def = default_gcv_grid(15, 15, 100);
    REQUIRE_NOTHROW(def.validate());
    REQUIRE(def.ridge_grid.size() == 30);
    REQUIRE(def.lambda1_grid.size() == 21);
    REQUIRE(def.lambda1_grid.front() == Approx(0.1 * 100));
    REQUIRE(def.lambda1_grid.back() == Approx(10.0 * 100));
    REQUIRE(def.lambda2_grid.front() == Approx(0.1 * 10.0));
}
