#pragma once

// Theory-side quantities: normalized Gram blocks Omega = G^{-1/2} W'W G^{-1/2}
// with G^{1/2} = diag(T on integrated, sqrt(T) on stationary coordinates),
// the annihilator M(1), KKT residuals of a fitted model, the irrepresentable
// statistic, and the two sign-recovery event indicators.

#include "dgp.hpp"
#include "estimator.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <vector>

namespace cointlasso {

struct TheoryContext {
    std::vector<int> active_beta;
    std::vector<int> active_gamma;
    std::vector<int> inactive_beta;
    std::vector<int> inactive_gamma;
    VectorXd gamma1_half;  // q entries: T on X(1) coords, sqrt(T) on Z(1)
    VectorXd gamma2_half;  // n-q entries, same rule
    MatrixXd w1;           // (X(1), Z(1))
    MatrixXd w2;           // (X(2), Z(2))
    MatrixXd omega11, omega12, omega21, omega22;
    MatrixXd m1;  // I_T - W(1)(W(1)'W(1))^{-1}W(1)'

    Eigen::Index q() const { return static_cast<Eigen::Index>(active_beta.size() + active_gamma.size()); }
};

namespace detail {

inline std::vector<int> complement(const std::vector<int>& idx, int n) {
    std::vector<bool> in(static_cast<std::size_t>(n), false);
    for (int j : idx) {
        if (j < 0 || j >= n) throw std::invalid_argument("index set out of range");
        in[static_cast<std::size_t>(j)] = true;
    }
    std::vector<int> out;
    for (int j = 0; j < n; ++j)
        if (!in[static_cast<std::size_t>(j)]) out.push_back(j);
    return out;
}

inline MatrixXd gather_cols(const MatrixXd& x, const MatrixXd& z,
                            const std::vector<int>& xcols, const std::vector<int>& zcols) {
    MatrixXd out(x.rows(), static_cast<Eigen::Index>(xcols.size() + zcols.size()));
    Eigen::Index k = 0;
    for (int j : xcols) out.col(k++) = x.col(j);
    for (int j : zcols) out.col(k++) = z.col(j);
    return out;
}

}  // namespace detail

inline TheoryContext build_context(const Dataset& data, const std::vector<int>& active_beta,
                                   const std::vector<int>& active_gamma) {
    data.validate();
    if (active_beta.empty() && active_gamma.empty())
        throw std::invalid_argument("build_context: active set union must be nonempty");

    TheoryContext ctx;
    ctx.active_beta = active_beta;
    ctx.active_gamma = active_gamma;
    ctx.inactive_beta = detail::complement(active_beta, static_cast<int>(data.n1()));
    ctx.inactive_gamma = detail::complement(active_gamma, static_cast<int>(data.n2()));
    ctx.w1 = detail::gather_cols(data.x, data.z, active_beta, active_gamma);
    ctx.w2 = detail::gather_cols(data.x, data.z, ctx.inactive_beta, ctx.inactive_gamma);

    const double t = static_cast<double>(data.rows());
    auto norms = [&](std::size_t n_int, std::size_t n_total) {
        VectorXd g(static_cast<Eigen::Index>(n_total));
        for (std::size_t k = 0; k < n_total; ++k)
            g[static_cast<Eigen::Index>(k)] = k < n_int ? t : std::sqrt(t);
        return g;
    };
    ctx.gamma1_half = norms(active_beta.size(), active_beta.size() + active_gamma.size());
    ctx.gamma2_half =
        norms(ctx.inactive_beta.size(), ctx.inactive_beta.size() + ctx.inactive_gamma.size());

    // Omega assembled once from the reordered design, then sliced.
    const Eigen::Index q = ctx.w1.cols();
    const Eigen::Index rest = ctx.w2.cols();
    MatrixXd reordered(data.rows(), q + rest);
    if (q > 0) reordered.leftCols(q) = ctx.w1;
    if (rest > 0) reordered.rightCols(rest) = ctx.w2;
    VectorXd inv_scale(q + rest);
    inv_scale << ctx.gamma1_half.cwiseInverse(), ctx.gamma2_half.cwiseInverse();
    const MatrixXd omega =
        inv_scale.asDiagonal() * (reordered.transpose() * reordered) * inv_scale.asDiagonal();
    ctx.omega11 = omega.topLeftCorner(q, q);
    ctx.omega12 = omega.topRightCorner(q, rest);
    ctx.omega21 = omega.bottomLeftCorner(rest, q);
    ctx.omega22 = omega.bottomRightCorner(rest, rest);

    const MatrixXd gram1 = ctx.w1.transpose() * ctx.w1;
    Eigen::FullPivLU<MatrixXd> lu(gram1);
    if (!lu.isInvertible())
        throw std::runtime_error("build_context: W(1)'W(1) is singular");
    ctx.m1 = MatrixXd::Identity(data.rows(), data.rows()) -
             ctx.w1 * lu.solve(ctx.w1.transpose());
    return ctx;
}

struct KktReport {
    // stacked over (beta, gamma); score_j = 2 w_j'(Y - W theta_hat)
    VectorXd score;
    VectorXd bound;     // lambda_block * weight_j
    VectorXd residual;  // active: |score - sgn * attenuated bound|; inactive: excess over bound
    std::vector<bool> ok;
    bool pass = false;
    double tol = 0.0;
};

// Stationarity check for the fitted model. Active coordinates must satisfy
// 2 w_j'(Y - W theta) = sgn(theta_j) * lambda_b * w_j * |theta_j|/(|theta_j|+eps)
// (the attenuation is the epsilon-perturbation the solver targets); zeroed
// coordinates must satisfy |2 w_j'(Y - W theta)| <= lambda_b * w_j. Violations
// are reported, not thrown.
inline KktReport check_kkt(const Dataset& data, const FitResult& fit,
                           const PenaltyConfig& config, double tol) {
    const Eigen::Index n1 = data.n1();
    const Eigen::Index n2 = data.n2();
    VectorXd resid = data.y;
    if (n1 > 0) resid -= data.x * fit.beta_hat;
    if (n2 > 0) resid -= data.z * fit.gamma_hat;

    KktReport report;
    report.tol = tol;
    report.score.resize(n1 + n2);
    report.bound.resize(n1 + n2);
    report.residual.resize(n1 + n2);
    report.ok.assign(static_cast<std::size_t>(n1 + n2), true);
    report.pass = true;

    auto check_one = [&](Eigen::Index j, const VectorXd& col, double coef, double lambda_b,
                         double weight) {
        const double score = 2.0 * col.dot(resid);
        const double bound = lambda_b * weight;
        report.score[j] = score;
        report.bound[j] = bound;
        bool ok;
        if (coef != 0.0) {
            const double attenuation = std::abs(coef) / (std::abs(coef) + fit.epsilon);
            const double target = (coef > 0.0 ? 1.0 : -1.0) * bound * attenuation;
            report.residual[j] = std::abs(score - target);
            ok = report.residual[j] <= tol * (1.0 + std::abs(target));
        } else {
            report.residual[j] = std::max(0.0, std::abs(score) - bound);
            ok = report.residual[j] <= tol * (1.0 + bound);
        }
        report.ok[static_cast<std::size_t>(j)] = ok;
        report.pass = report.pass && ok;
    };

    for (Eigen::Index j = 0; j < n1; ++j)
        check_one(j, data.x.col(j), fit.beta_hat[j], config.lambda1, fit.weights1_final[j]);
    for (Eigen::Index j = 0; j < n2; ++j)
        check_one(n1 + j, data.z.col(j), fit.gamma_hat[j], config.lambda2,
                  fit.weights2_final[j]);
    return report;
}

inline double default_kkt_tol(const PenaltyConfig& config) { return 100.0 * config.tol; }

struct IrrepresentableStat {
    VectorXd values;      // |Omega21 Omega11^{-1} sgn(theta0(1))|
    double eta_margin;    // 1 - max entry; positive means the IC holds
};

inline IrrepresentableStat irrepresentable_stat(const TheoryContext& ctx,
                                                const VectorXd& sign_vector) {
    if (sign_vector.size() != ctx.q())
        throw std::invalid_argument("irrepresentable_stat: sign vector size mismatch");
    Eigen::FullPivLU<MatrixXd> lu(ctx.omega11);
    if (!lu.isInvertible())
        throw std::runtime_error("irrepresentable_stat: Omega11 is singular");
    IrrepresentableStat stat;
    stat.values = (ctx.omega21 * lu.solve(sign_vector)).cwiseAbs();
    stat.eta_margin = 1.0 - (stat.values.size() > 0 ? stat.values.maxCoeff() : 0.0);
    return stat;
}

struct EventIndicators {
    bool a_holds = false;
    bool b_holds = false;
};

// Element-wise evaluation of the two sign-recovery events, with
// lambda = diag(lambda1 on integrated coords, lambda2 on stationary),
// L(1), L(2) the weight diagonals, U the true error vector:
//   A: G1^{-1/2}|Om11^{-1}W(1)'U| < G1^{1/2}|th0(1)| - (1/2)G1^{-1/2}lam|Om11^{-1}L(1)s|
//   B: 2|G2^{-1/2}W(2)'M(1)U| < G2^{-1/2}lam L(2)1 - G2^{-1/2}lam|Om21 Om11^{-1}L(1)s|
inline EventIndicators event_indicators(const Dataset& data, const TheoryContext& ctx,
                                        const PenaltyConfig& config,
                                        const VectorXd& weights1, const VectorXd& weights2,
                                        const VectorXd& u) {
    if (!data.truth)
        throw std::invalid_argument("event_indicators: dataset truth is required");
    if (u.size() != data.rows())
        throw std::invalid_argument("event_indicators: error vector length mismatch");
    if (weights1.size() != data.n1() || weights2.size() != data.n2())
        throw std::invalid_argument("event_indicators: weight length mismatch");

    const Eigen::Index q = ctx.q();
    const Eigen::Index q1 = static_cast<Eigen::Index>(ctx.active_beta.size());
    VectorXd theta0_1(q), sign_1(q), lambda_1(q), l1_diag(q);
    for (Eigen::Index k = 0; k < q; ++k) {
        const bool integrated = k < q1;
        const int j = integrated ? ctx.active_beta[static_cast<std::size_t>(k)]
                                 : ctx.active_gamma[static_cast<std::size_t>(k - q1)];
        const double coef = integrated ? data.truth->beta0[j] : data.truth->gamma0[j];
        theta0_1[k] = coef;
        sign_1[k] = coef > 0.0 ? 1.0 : (coef < 0.0 ? -1.0 : 0.0);
        lambda_1[k] = integrated ? config.lambda1 : config.lambda2;
        l1_diag[k] = integrated ? weights1[j] : weights2[j];
    }
    const Eigen::Index rest = ctx.w2.cols();
    const Eigen::Index r1 = static_cast<Eigen::Index>(ctx.inactive_beta.size());
    VectorXd lambda_2(rest), l2_diag(rest);
    for (Eigen::Index k = 0; k < rest; ++k) {
        const bool integrated = k < r1;
        const int j = integrated ? ctx.inactive_beta[static_cast<std::size_t>(k)]
                                 : ctx.inactive_gamma[static_cast<std::size_t>(k - r1)];
        lambda_2[k] = integrated ? config.lambda1 : config.lambda2;
        l2_diag[k] = integrated ? weights1[j] : weights2[j];
    }

    Eigen::FullPivLU<MatrixXd> lu(ctx.omega11);
    if (!lu.isInvertible())
        throw std::runtime_error("event_indicators: Omega11 is singular");

    EventIndicators out;
    {
        const VectorXd lhs =
            (lu.solve(ctx.w1.transpose() * u)).cwiseAbs().cwiseQuotient(ctx.gamma1_half);
        const VectorXd bias = lu.solve(l1_diag.cwiseProduct(sign_1)).cwiseAbs();
        const VectorXd rhs = ctx.gamma1_half.cwiseProduct(theta0_1.cwiseAbs()) -
                             0.5 * lambda_1.cwiseProduct(bias).cwiseQuotient(ctx.gamma1_half);
        out.a_holds = (lhs.array() < rhs.array()).all();
    }
    if (rest > 0) {
        const VectorXd lhs =
            2.0 * (ctx.w2.transpose() * (ctx.m1 * u)).cwiseAbs().cwiseQuotient(ctx.gamma2_half);
        const VectorXd ic = (ctx.omega21 * lu.solve(l1_diag.cwiseProduct(sign_1))).cwiseAbs();
        const VectorXd rhs = lambda_2.cwiseProduct(l2_diag).cwiseQuotient(ctx.gamma2_half) -
                             lambda_2.cwiseProduct(ic).cwiseQuotient(ctx.gamma2_half);
        out.b_holds = (lhs.array() < rhs.array()).all();
    } else {
        out.b_holds = true;
    }
    return out;
}

// sgn(theta_hat_j) == sgn(theta0_j) for every coordinate, zeros matching.
inline bool sign_match(const VectorXd& theta_hat, const VectorXd& theta0) {
    if (theta_hat.size() != theta0.size())
        throw std::invalid_argument("sign_match: length mismatch");
    for (Eigen::Index j = 0; j < theta_hat.size(); ++j) {
        const int a = theta_hat[j] > 0.0 ? 1 : (theta_hat[j] < 0.0 ? -1 : 0);
        const int b = theta0[j] > 0.0 ? 1 : (theta0[j] < 0.0 ? -1 : 0);
        if (a != b) return false;
    }
    return true;
}

}  // namespace cointlasso
