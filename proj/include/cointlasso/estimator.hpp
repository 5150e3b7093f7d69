#pragma once

// Adaptive-Lasso estimation for mixed integrated/stationary regressions.
// The objective
//   ||Y - X b - Z g||^2 + lambda1 * sum_j w1_j |b_j| + lambda2 * sum_j w2_j |g_j|
// is minimized by iterating a perturbed local quadratic approximation with
// data-driven weights w_j = |theta_j|^{-rho} recomputed each step, and a
// sandwich formula gives covariance estimates for the active coefficients.

#include "dgp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace cointlasso {

struct PenaltyConfig {
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double rho = 0.9;
    // NaN means "derive from the data scale" at fit time.
    double epsilon = std::numeric_limits<double>::quiet_NaN();
    double zero_threshold = std::numeric_limits<double>::quiet_NaN();
    int max_iter = 500;
    double tol = 1e-8;
    double weight_cap = 1e8;
    // When set, weights are held fixed instead of being recomputed from the
    // current iterate.
    std::optional<VectorXd> fixed_weights1;
    std::optional<VectorXd> fixed_weights2;
    // Variance plug-ins for the sandwich covariance: explicit values win;
    // otherwise dataset truth (when present) or a residual AR(ar_order) fit.
    std::optional<double> sigma_uu;
    std::optional<double> sigma_uu_star;
    int ar_order = 0;

    void validate() const {
        if (lambda1 < 0.0 || lambda2 < 0.0)
            throw std::invalid_argument("PenaltyConfig: lambda1, lambda2 must be >= 0");
        if (!(rho > 0.0) || rho > 1.0)
            throw std::invalid_argument("PenaltyConfig: rho must lie in (0,1]");
        if (max_iter < 1) throw std::invalid_argument("PenaltyConfig: max_iter must be >= 1");
        if (!(tol > 0.0)) throw std::invalid_argument("PenaltyConfig: tol must be positive");
        if (!(weight_cap > 0.0))
            throw std::invalid_argument("PenaltyConfig: weight_cap must be positive");
        if (ar_order < 0) throw std::invalid_argument("PenaltyConfig: ar_order must be >= 0");
    }
};

// Scale used to anchor epsilon and the zeroing threshold.
inline double response_scale(const VectorXd& y) {
    if (y.size() == 0) return 1.0;
    const double rms = std::sqrt(y.squaredNorm() / static_cast<double>(y.size()));
    return std::max(rms, 1e-8);
}

inline double default_epsilon(const VectorXd& y) { return 1e-6 * response_scale(y); }

inline double default_zero_threshold(const VectorXd& y) {
    const double t = std::max<double>(1, y.size());
    return 1e-4 * response_scale(y) / std::sqrt(t);
}

struct IterationStat {
    double objective_before = 0.0;  // exact weighted-L1 objective at theta_k, this step's weights
    double objective_after = 0.0;   // same weights, after the inner solve
    double max_change = 0.0;
};

struct FitResult {
    VectorXd beta_hat;
    VectorXd gamma_hat;
    std::vector<int> active_beta;
    std::vector<int> active_gamma;
    int iterations = 0;
    bool converged = false;
    VectorXd weights1_final;  // lambda_{1j}
    VectorXd weights2_final;  // lambda_{2j}
    MatrixXd cov_beta;        // over active_beta
    MatrixXd cov_gamma;       // over active_gamma
    double sigma_uu_used = 0.0;
    double sigma_uu_star_used = 0.0;
    std::vector<IterationStat> trace;
    // configuration echo
    double lambda1 = 0.0, lambda2 = 0.0, rho = 0.9, epsilon = 0.0, zero_threshold = 0.0;

    VectorXd theta() const {
        VectorXd t(beta_hat.size() + gamma_hat.size());
        t << beta_hat, gamma_hat;
        return t;
    }
};

// theta0 = (W'W + lambda I)^{-1} W'Y
inline VectorXd ridge_fit(const Dataset& data, double lambda_ridge) {
    if (lambda_ridge < 0.0)
        throw std::invalid_argument("ridge_fit: lambda_ridge must be >= 0");
    const MatrixXd w = data.design();
    const Eigen::Index n = w.cols();
    MatrixXd gram = w.transpose() * w;
    gram.diagonal().array() += lambda_ridge;
    const VectorXd rhs = w.transpose() * data.y;
    if (lambda_ridge == 0.0) {
        Eigen::FullPivLU<MatrixXd> lu(gram);
        if (!lu.isInvertible())
            throw std::runtime_error("ridge_fit: W'W is singular at lambda_ridge = 0");
        return lu.solve(rhs);
    }
    return Eigen::LDLT<MatrixXd>(gram).solve(rhs);
}

// Diagonal of E_k: entry j is lambda_block * weight_j / (|theta_j| + epsilon),
// lambda1 for the first n1 entries and lambda2 for the rest.
inline VectorXd build_penalty_matrix(const VectorXd& theta_k, const VectorXd& weights,
                                     double lambda1, double lambda2, double epsilon,
                                     Eigen::Index n1) {
    if (weights.size() != theta_k.size())
        throw std::invalid_argument("build_penalty_matrix: size mismatch");
    if (!(epsilon > 0.0))
        throw std::invalid_argument("build_penalty_matrix: epsilon must be positive");
    if ((weights.array() <= 0.0).any() || !weights.allFinite())
        throw std::invalid_argument("build_penalty_matrix: weights must be positive and finite");
    VectorXd diag(theta_k.size());
    for (Eigen::Index j = 0; j < theta_k.size(); ++j) {
        const double lambda_block = j < n1 ? lambda1 : lambda2;
        diag[j] = lambda_block * weights[j] / (std::abs(theta_k[j]) + epsilon);
    }
    return diag;
}

// theta = (W'W + diag(e))^{-1} W'Y
inline VectorXd lqa_step(const Dataset& data, const VectorXd& e_diag) {
    const MatrixXd w = data.design();
    if (e_diag.size() != w.cols()) throw std::invalid_argument("lqa_step: size mismatch");
    MatrixXd gram = w.transpose() * w;
    gram.diagonal() += e_diag;
    Eigen::LDLT<MatrixXd> ldlt(gram);
    const double rcond = ldlt.rcond();
    if (ldlt.info() != Eigen::Success || rcond < 1e-15) {
        std::ostringstream msg;
        msg << "lqa_step: penalized normal equations numerically singular (rcond = "
            << rcond << ")";
        throw std::runtime_error(msg.str());
    }
    return ldlt.solve(w.transpose() * data.y);
}

// Exact objective of the weighted L1 problem at fixed weights.
inline double penalized_objective(const Dataset& data, const VectorXd& theta,
                                  const VectorXd& weights1, const VectorXd& weights2,
                                  double lambda1, double lambda2) {
    const Eigen::Index n1 = data.n1();
    VectorXd resid = data.y;
    if (n1 > 0) resid -= data.x * theta.head(n1);
    if (data.n2() > 0) resid -= data.z * theta.tail(data.n2());
    double obj = resid.squaredNorm();
    for (Eigen::Index j = 0; j < n1; ++j)
        obj += lambda1 * weights1[j] * std::abs(theta[j]);
    for (Eigen::Index j = 0; j < data.n2(); ++j)
        obj += lambda2 * weights2[j] * std::abs(theta[n1 + j]);
    return obj;
}

// sigma * (A + diag(e))^{-1} A (A + diag(e))^{-1} for a Gram block A.
inline MatrixXd sandwich_block(const MatrixXd& gram, const VectorXd& e_diag, double sigma) {
    if (gram.rows() == 0) return MatrixXd(0, 0);
    if (gram.rows() != gram.cols() || e_diag.size() != gram.rows())
        throw std::invalid_argument("sandwich_block: dimension mismatch");
    MatrixXd penalized = gram;
    penalized.diagonal() += e_diag;
    Eigen::LDLT<MatrixXd> ldlt(penalized);
    if (ldlt.info() != Eigen::Success || ldlt.rcond() < 1e-15)
        throw std::runtime_error("sandwich_block: singular inner matrix");
    const MatrixXd inner = ldlt.solve(gram);          // (A+E)^{-1} A
    return sigma * ldlt.solve(inner.transpose());     // (A+E)^{-1} A (A+E)^{-1}
}

namespace detail {

inline VectorXd iterated_weights(const VectorXd& theta, double rho, double epsilon,
                                 double cap) {
    VectorXd w(theta.size());
    for (Eigen::Index j = 0; j < theta.size(); ++j) {
        const double mag = std::max(std::abs(theta[j]), epsilon);
        w[j] = std::min(std::pow(mag, -rho), cap);
    }
    return w;
}

// Effective ridge diagonal applied by the solver. The factor 1/2 makes the
// fixed point of theta = (W'W + diag/2)^{-1} W'Y satisfy the subgradient
// conditions 2 w_j'(Y - W theta) = sgn(theta_j) lambda_b w_j of the
// unscaled L1 objective.
inline VectorXd effective_penalty_diag(const VectorXd& theta, const VectorXd& weights1,
                                       const VectorXd& weights2, double lambda1,
                                       double lambda2, double epsilon) {
    const Eigen::Index n1 = weights1.size();
    VectorXd stacked(n1 + weights2.size());
    stacked << weights1, weights2;
    return 0.5 * build_penalty_matrix(theta, stacked, lambda1, lambda2, epsilon, n1);
}

// AR(ar_order) plug-in for (sigma_uu, sigma_uu_star) from fitted residuals.
inline LongRunVariance residual_variance_plugin(const VectorXd& resid, int ar_order) {
    const Eigen::Index t = resid.size();
    const double sigma_uu = resid.squaredNorm() / static_cast<double>(t);
    if (ar_order == 0 || t <= ar_order + 1) return {sigma_uu, sigma_uu};
    const Eigen::Index rows = t - ar_order;
    MatrixXd lags(rows, ar_order);
    for (int k = 0; k < ar_order; ++k)
        lags.col(k) = resid.segment(ar_order - 1 - k, rows);
    const VectorXd head = resid.tail(rows);
    const VectorXd phi = (lags.transpose() * lags)
                             .ldlt()
                             .solve(lags.transpose() * head);
    const double innov_var = (head - lags * phi).squaredNorm() / static_cast<double>(rows);
    const double one_minus = 1.0 - phi.sum();
    if (std::abs(one_minus) < 1e-8) return {sigma_uu, sigma_uu};
    return {sigma_uu, innov_var / (one_minus * one_minus)};
}

}  // namespace detail

// Covariance of the active coefficients:
//   cov(beta(1))  = sigma_uu_star (X1'X1+E1)^{-1} X1'X1 (X1'X1+E1)^{-1}
//   cov(gamma(1)) = sigma_uu      (Z1'Z1+E1)^{-1} Z1'Z1 (Z1'Z1+E1)^{-1}
// with E1 the penalty diagonal the solver applied at convergence restricted
// to the active coordinates. Zero-valued coefficients get zero standard error.
inline std::pair<MatrixXd, MatrixXd> sandwich_cov(const Dataset& data, const FitResult& fit,
                                                  double sigma_uu, double sigma_uu_star) {
    const VectorXd diag = detail::effective_penalty_diag(
        fit.theta(), fit.weights1_final, fit.weights2_final, fit.lambda1, fit.lambda2,
        fit.epsilon);

    auto block = [&](const MatrixXd& cols, const std::vector<int>& active,
                     Eigen::Index offset, double sigma) {
        const Eigen::Index q = static_cast<Eigen::Index>(active.size());
        if (q == 0) return MatrixXd(0, 0);
        MatrixXd sub(cols.rows(), q);
        VectorXd e(q);
        for (Eigen::Index k = 0; k < q; ++k) {
            sub.col(k) = cols.col(active[k]);
            e[k] = diag[offset + active[k]];
        }
        return sandwich_block(sub.transpose() * sub, e, sigma);
    };

    return {block(data.x, fit.active_beta, 0, sigma_uu_star),
            block(data.z, fit.active_gamma, data.n1(), sigma_uu)};
}

// Iterated adaptive Lasso via the perturbed LQA. Starts from a ridge
// estimate, recomputes the weights from the current iterate each step
// (magnitudes floored at epsilon, capped at weight_cap), and solves the
// penalized normal equations on the surviving coordinates. Coordinates
// falling below zero_threshold are set to exact zero and leave the system.
inline FitResult adaptive_lasso_fit(const Dataset& data, const PenaltyConfig& config,
                                    double lambda_ridge) {
    data.validate();
    config.validate();
    const Eigen::Index n1 = data.n1();
    const Eigen::Index n2 = data.n2();
    const Eigen::Index n = n1 + n2;
    if (config.fixed_weights1 && config.fixed_weights1->size() != n1)
        throw std::invalid_argument("adaptive_lasso_fit: fixed_weights1 size mismatch");
    if (config.fixed_weights2 && config.fixed_weights2->size() != n2)
        throw std::invalid_argument("adaptive_lasso_fit: fixed_weights2 size mismatch");

    const double epsilon =
        std::isnan(config.epsilon) ? default_epsilon(data.y) : config.epsilon;
    const double zero_threshold = std::isnan(config.zero_threshold)
                                      ? default_zero_threshold(data.y)
                                      : config.zero_threshold;
    if (!(epsilon > 0.0) || !(zero_threshold > 0.0))
        throw std::invalid_argument("adaptive_lasso_fit: epsilon and zero_threshold must be positive");

    const MatrixXd w = data.design();
    const MatrixXd gram = w.transpose() * w;
    const VectorXd rhs = w.transpose() * data.y;

    VectorXd theta = ridge_fit(data, lambda_ridge);
    std::vector<bool> alive(static_cast<std::size_t>(n), true);

    FitResult fit;
    fit.lambda1 = config.lambda1;
    fit.lambda2 = config.lambda2;
    fit.rho = config.rho;
    fit.epsilon = epsilon;
    fit.zero_threshold = zero_threshold;

    VectorXd weights1, weights2;
    auto current_weights = [&](const VectorXd& th) {
        if (config.fixed_weights1)
            weights1 = *config.fixed_weights1;
        else
            weights1 = detail::iterated_weights(th.head(n1), config.rho, epsilon,
                                                config.weight_cap);
        if (config.fixed_weights2)
            weights2 = *config.fixed_weights2;
        else
            weights2 = detail::iterated_weights(th.tail(n2), config.rho, epsilon,
                                                config.weight_cap);
    };

    int iter = 0;
    bool converged = false;
    for (; iter < config.max_iter; ++iter) {
        current_weights(theta);
        const VectorXd diag = detail::effective_penalty_diag(
            theta, weights1, weights2, config.lambda1, config.lambda2, epsilon);

        std::vector<Eigen::Index> idx;
        idx.reserve(static_cast<std::size_t>(n));
        for (Eigen::Index j = 0; j < n; ++j)
            if (alive[static_cast<std::size_t>(j)]) idx.push_back(j);

        VectorXd next = VectorXd::Zero(n);
        if (!idx.empty()) {
            const Eigen::Index m = static_cast<Eigen::Index>(idx.size());
            MatrixXd sub(m, m);
            VectorXd sub_rhs(m);
            for (Eigen::Index a = 0; a < m; ++a) {
                sub_rhs[a] = rhs[idx[a]];
                for (Eigen::Index b = 0; b < m; ++b) sub(a, b) = gram(idx[a], idx[b]);
                sub(a, a) += diag[idx[a]];
            }
            Eigen::LDLT<MatrixXd> ldlt(sub);
            if (ldlt.info() != Eigen::Success)
                throw std::runtime_error("adaptive_lasso_fit: penalized system not solvable");
            const VectorXd sol = ldlt.solve(sub_rhs);
            for (Eigen::Index a = 0; a < m; ++a) next[idx[a]] = sol[a];
        }

        IterationStat stat;
        stat.objective_before = penalized_objective(data, theta, weights1, weights2,
                                                    config.lambda1, config.lambda2);
        stat.objective_after = penalized_objective(data, next, weights1, weights2,
                                                   config.lambda1, config.lambda2);

        // hard-zero coordinates below the threshold; they never re-enter
        for (Eigen::Index j = 0; j < n; ++j) {
            if (alive[static_cast<std::size_t>(j)] && std::abs(next[j]) < zero_threshold) {
                next[j] = 0.0;
                alive[static_cast<std::size_t>(j)] = false;
            }
        }

        stat.max_change = (next - theta).cwiseAbs().maxCoeff();
        fit.trace.push_back(stat);
        theta = next;
        if (stat.max_change < config.tol) {
            converged = true;
            ++iter;
            break;
        }
    }

    fit.iterations = iter;
    fit.converged = converged;
    fit.beta_hat = theta.head(n1);
    fit.gamma_hat = theta.tail(n2);
    current_weights(theta);
    fit.weights1_final = weights1;
    fit.weights2_final = weights2;
    for (Eigen::Index j = 0; j < n1; ++j)
        if (fit.beta_hat[j] != 0.0) fit.active_beta.push_back(static_cast<int>(j));
    for (Eigen::Index j = 0; j < n2; ++j)
        if (fit.gamma_hat[j] != 0.0) fit.active_gamma.push_back(static_cast<int>(j));

    LongRunVariance lrv;
    if (config.sigma_uu && config.sigma_uu_star) {
        lrv = {*config.sigma_uu, *config.sigma_uu_star};
    } else if (data.truth) {
        lrv = long_run_variance(data.truth->error, data.truth->sigma_u);
    } else {
        VectorXd resid = data.y;
        if (n1 > 0) resid -= data.x * fit.beta_hat;
        if (n2 > 0) resid -= data.z * fit.gamma_hat;
        lrv = detail::residual_variance_plugin(resid, config.ar_order);
    }
    fit.sigma_uu_used = lrv.sigma_uu;
    fit.sigma_uu_star_used = lrv.sigma_uu_star;
    std::tie(fit.cov_beta, fit.cov_gamma) =
        sandwich_cov(data, fit, lrv.sigma_uu, lrv.sigma_uu_star);
    return fit;
}

// Per-coefficient standard errors over the full blocks, zero for inactive.
inline std::pair<VectorXd, VectorXd> standard_errors(const FitResult& fit) {
    VectorXd se_beta = VectorXd::Zero(fit.beta_hat.size());
    VectorXd se_gamma = VectorXd::Zero(fit.gamma_hat.size());
    for (std::size_t k = 0; k < fit.active_beta.size(); ++k)
        se_beta[fit.active_beta[k]] =
            std::sqrt(std::max(0.0, fit.cov_beta(static_cast<Eigen::Index>(k),
                                                 static_cast<Eigen::Index>(k))));
    for (std::size_t k = 0; k < fit.active_gamma.size(); ++k)
        se_gamma[fit.active_gamma[k]] =
            std::sqrt(std::max(0.0, fit.cov_gamma(static_cast<Eigen::Index>(k),
                                                  static_cast<Eigen::Index>(k))));
    return {se_beta, se_gamma};
}

}  // namespace cointlasso
