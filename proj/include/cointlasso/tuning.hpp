#pragma once

// Generalized cross-validation for the ridge initialization and the
// adaptive-Lasso level parameters (lambda1, lambda2):
//   GCV(.) = T^{-1} ||Y - W theta||^2 / (1 - e/T)^2,
// with e the trace of the associated projection matrix. The lasso-side
// statistic is a one-shot penalized solve with ridge-based weights; no
// weight iteration happens inside the search.

#include "dgp.hpp"
#include "estimator.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace cointlasso {

struct GcvGrid {
    std::vector<double> ridge_grid;
    std::vector<double> lambda1_grid;
    std::vector<double> lambda2_grid;
    double rho = 0.9;

    void validate() const {
        auto ascending = [](const std::vector<double>& g) {
            for (std::size_t i = 1; i < g.size(); ++i)
                if (g[i] <= g[i - 1]) return false;
            return true;
        };
        if (ridge_grid.empty() || lambda1_grid.empty() || lambda2_grid.empty())
            throw std::invalid_argument("GcvGrid: grids must be nonempty");
        if (!ascending(ridge_grid) || !ascending(lambda1_grid) || !ascending(lambda2_grid))
            throw std::invalid_argument("GcvGrid: grids must be strictly ascending");
        if (ridge_grid.front() <= 0.0)
            throw std::invalid_argument("GcvGrid: ridge grid must be positive");
        if (lambda1_grid.front() < 0.0 || lambda2_grid.front() < 0.0)
            throw std::invalid_argument("GcvGrid: lambda grids must be non-negative");
        if (!(rho > 0.0) || rho > 1.0)
            throw std::invalid_argument("GcvGrid: rho must lie in (0,1]");
    }
};

inline std::vector<double> log_spaced(double lo, double hi, int count) {
    if (count < 1 || !(lo > 0.0) || !(hi > lo))
        throw std::invalid_argument("log_spaced: need 0 < lo < hi and count >= 1");
    std::vector<double> grid(static_cast<std::size_t>(count));
    if (count == 1) {
        grid[0] = std::sqrt(lo * hi);
        return grid;
    }
    const double step = (std::log(hi) - std::log(lo)) / (count - 1);
    for (int i = 0; i < count; ++i) grid[static_cast<std::size_t>(i)] = std::exp(std::log(lo) + i * step);
    return grid;
}

// Default grids: the ridge grid brackets the typical W'W diagonal, the
// lambda grids scale with the theoretical rates (lambda1 ~ T, lambda2 ~
// sqrt(T)) so the search covers the consistency region on either side.
inline GcvGrid default_gcv_grid(int n1, int n2, int T, double rho = 0.9) {
    if (n1 < 0 || n2 < 0 || n1 + n2 < 1 || T < 1)
        throw std::invalid_argument("default_gcv_grid: bad dimensions");
    const double t = static_cast<double>(T);
    const double scale_w =
        (n1 * t * (t + 1.0) / 2.0 + n2 * t) / static_cast<double>(n1 + n2);
    GcvGrid grid;
    grid.ridge_grid = log_spaced(1e-4 * scale_w, 1e4 * scale_w, 30);
    grid.lambda1_grid = log_spaced(0.1 * t, 10.0 * t, 21);
    grid.lambda2_grid = log_spaced(0.1 * std::sqrt(t), 10.0 * std::sqrt(t), 21);
    grid.rho = rho;
    return grid;
}

struct GcvCell {
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double gcv = std::numeric_limits<double>::infinity();
    double effective_params = 0.0;
};

struct LambdaSelection {
    double lambda_ridge = 0.0;
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double gcv = 0.0;
    VectorXd theta0;
    std::vector<GcvCell> surface;  // lambda1-major, lambda2-minor order
};

namespace detail {

// Shared per-dataset quantities for grid evaluation.
struct GcvWorkspace {
    MatrixXd design;
    MatrixXd gram;
    VectorXd rhs;
    const VectorXd* y;
    double t;

    explicit GcvWorkspace(const Dataset& data)
        : design(data.design()),
          gram(design.transpose() * design),
          rhs(design.transpose() * data.y),
          y(&data.y),
          t(static_cast<double>(data.rows())) {}

    // (rss, effective_params, solvable)
    struct Eval {
        double rss = 0.0;
        double effective_params = 0.0;
        bool ok = false;
    };

    Eval evaluate(const VectorXd& penalty_diag) const {
        Eval out;
        MatrixXd penalized = gram;
        penalized.diagonal() += penalty_diag;
        Eigen::LDLT<MatrixXd> ldlt(penalized);
        if (ldlt.info() != Eigen::Success || ldlt.rcond() < 1e-15) return out;
        const VectorXd theta = ldlt.solve(rhs);
        out.effective_params = ldlt.solve(gram).trace();
        out.rss = (*y - design * theta).squaredNorm();
        out.ok = true;
        return out;
    }
};

inline double gcv_from(const GcvWorkspace::Eval& eval, double t) {
    if (!eval.ok || eval.effective_params >= t)
        return std::numeric_limits<double>::infinity();
    const double denom = 1.0 - eval.effective_params / t;
    return (eval.rss / t) / (denom * denom);
}

}  // namespace detail

// trace(W (W'W + lambda I)^{-1} W') = sum_i d_i^2 / (d_i^2 + lambda)
inline double effective_params_ridge(const Dataset& data, double lambda_star) {
    if (lambda_star < 0.0)
        throw std::invalid_argument("effective_params_ridge: lambda_star must be >= 0");
    detail::GcvWorkspace ws(data);
    const Eigen::Index n = ws.gram.rows();
    MatrixXd penalized = ws.gram;
    penalized.diagonal().array() += lambda_star;
    Eigen::LDLT<MatrixXd> ldlt(penalized);
    if (ldlt.info() != Eigen::Success || ldlt.rcond() < 1e-15)
        throw std::runtime_error("effective_params_ridge: singular system");
    if (lambda_star == 0.0) return static_cast<double>(n);
    return ldlt.solve(ws.gram).trace();
}

inline double gcv_ridge(const Dataset& data, double lambda_star) {
    if (lambda_star < 0.0)
        throw std::invalid_argument("gcv_ridge: lambda_star must be >= 0");
    detail::GcvWorkspace ws(data);
    VectorXd diag = VectorXd::Constant(ws.gram.rows(), lambda_star);
    return detail::gcv_from(ws.evaluate(diag), ws.t);
}

// Grid minimizer of GCV_r; ties break toward the larger lambda.
inline double select_ridge(const Dataset& data, const GcvGrid& grid) {
    grid.validate();
    detail::GcvWorkspace ws(data);
    double best_lambda = 0.0;
    double best = std::numeric_limits<double>::infinity();
    bool found = false;
    for (double lambda : grid.ridge_grid) {
        VectorXd diag = VectorXd::Constant(ws.gram.rows(), lambda);
        const double gcv = detail::gcv_from(ws.evaluate(diag), ws.t);
        if (!std::isfinite(gcv)) continue;
        if (!found || gcv < best || (gcv == best && lambda > best_lambda)) {
            best = gcv;
            best_lambda = lambda;
            found = true;
        }
    }
    if (!found)
        throw std::runtime_error("select_ridge: every grid point is over-parameterized");
    return best_lambda;
}

// Weights from the ridge initialization, |theta0_j| floored at epsilon.
inline std::pair<VectorXd, VectorXd> gcv_weights(const VectorXd& theta0, Eigen::Index n1,
                                                 double rho, double epsilon,
                                                 double weight_cap = 1e8) {
    return {detail::iterated_weights(theta0.head(n1), rho, epsilon, weight_cap),
            detail::iterated_weights(theta0.tail(theta0.size() - n1), rho, epsilon,
                                     weight_cap)};
}

// One-shot penalized evaluation: E from the ridge weights, a single solve,
// effective parameters from the projection trace, then the GCV ratio.
inline double gcv_adalasso(const Dataset& data, const VectorXd& theta0, double lambda1,
                           double lambda2, double rho, double epsilon) {
    if (theta0.size() != data.n())
        throw std::invalid_argument("gcv_adalasso: theta0 size mismatch");
    detail::GcvWorkspace ws(data);
    auto [w1, w2] = gcv_weights(theta0, data.n1(), rho, epsilon);
    VectorXd weights(data.n());
    weights << w1, w2;
    const VectorXd diag =
        build_penalty_matrix(theta0, weights, lambda1, lambda2, epsilon, data.n1());
    return detail::gcv_from(ws.evaluate(diag), ws.t);
}

// Exhaustive 2-D search over (lambda1, lambda2); ties prefer the larger
// lambda1 + lambda2. Returns the full surface for diagnostics.
inline LambdaSelection select_lambdas(const Dataset& data, const GcvGrid& grid) {
    grid.validate();
    LambdaSelection sel;
    sel.lambda_ridge = select_ridge(data, grid);
    sel.theta0 = ridge_fit(data, sel.lambda_ridge);
    const double epsilon = default_epsilon(data.y);

    detail::GcvWorkspace ws(data);
    auto [w1, w2] = gcv_weights(sel.theta0, data.n1(), grid.rho, epsilon);
    VectorXd weights(data.n());
    weights << w1, w2;

    sel.surface.reserve(grid.lambda1_grid.size() * grid.lambda2_grid.size());
    bool found = false;
    double best = std::numeric_limits<double>::infinity();
    double best_sum = -1.0;
    for (double l1 : grid.lambda1_grid) {
        for (double l2 : grid.lambda2_grid) {
            const VectorXd diag =
                build_penalty_matrix(sel.theta0, weights, l1, l2, epsilon, data.n1());
            const auto eval = ws.evaluate(diag);
            GcvCell cell;
            cell.lambda1 = l1;
            cell.lambda2 = l2;
            cell.effective_params = eval.effective_params;
            cell.gcv = detail::gcv_from(eval, ws.t);
            sel.surface.push_back(cell);
            if (!std::isfinite(cell.gcv)) continue;
            const double sum = l1 + l2;
            const bool better =
                !found || cell.gcv < best ||
                (cell.gcv == best &&
                 (sum > best_sum ||
                  (sum == best_sum && (l1 > sel.lambda1 || (l1 == sel.lambda1 && l2 > sel.lambda2)))));
            if (better) {
                best = cell.gcv;
                best_sum = sum;
                sel.lambda1 = l1;
                sel.lambda2 = l2;
                sel.gcv = cell.gcv;
                found = true;
            }
        }
    }
    if (!found) throw std::runtime_error("select_lambdas: empty feasible set");
    return sel;
}

}  // namespace cointlasso
