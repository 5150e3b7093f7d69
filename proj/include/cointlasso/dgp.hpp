#pragma once

// Synthetic data generation for cointegration regressions:
//   y_t = alpha0 + beta0'x_t + gamma0'z_t + u_t,   x_t = x_{t-1} + v_t,
// with (v_t', z_t')' multivariate normal and u_t iid or AR(1), Gaussian or
// Student-t innovations. Includes the six built-in Monte Carlo designs.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace cointlasso {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class ErrorKind { iid_gaussian, ar1_gaussian, ar1_student_t };

struct ErrorSpec {
    ErrorKind kind = ErrorKind::iid_gaussian;
    double ar_coefficient = 0.0;  // phi, ignored for iid_gaussian
    int student_df = 4;           // only for ar1_student_t

    void validate() const {
        if (kind != ErrorKind::iid_gaussian && std::abs(ar_coefficient) >= 1.0)
            throw std::invalid_argument("ErrorSpec: |ar_coefficient| must be < 1");
        if (kind == ErrorKind::ar1_student_t && student_df < 3)
            throw std::invalid_argument("ErrorSpec: student_df must be >= 3");
    }
};

struct DgpSpec {
    int n1 = 0;                 // integrated candidates
    int n2 = 0;                 // stationary candidates
    VectorXd beta0;             // length n1
    VectorXd gamma0;            // length n2
    double toeplitz_r = 0.0;    // pairwise correlation base r
    int corr_block_size = 0;    // leading w-components sharing the Toeplitz structure
    ErrorSpec error;
    double sigma_u = 1.0;       // innovation scale of u
    double alpha0 = 0.0;        // true intercept, known to be 0

    void validate() const {
        if (n1 < 1 || n2 < 1)
            throw std::invalid_argument("DgpSpec: n1 and n2 must be >= 1");
        if (beta0.size() != n1 || gamma0.size() != n2)
            throw std::invalid_argument("DgpSpec: coefficient lengths must match n1, n2");
        if (toeplitz_r < 0.0 || toeplitz_r >= 1.0)
            throw std::invalid_argument("DgpSpec: toeplitz_r must lie in [0,1)");
        if (corr_block_size < 0 || corr_block_size > n1 + n2 + 1)
            throw std::invalid_argument("DgpSpec: corr_block_size out of range");
        if (!(sigma_u > 0.0))
            throw std::invalid_argument("DgpSpec: sigma_u must be positive");
        error.validate();
    }
};

struct Holdout {
    VectorXd y;
    MatrixXd x;
    MatrixXd z;
};

// One simulated (or imported) sample. x columns are treated as I(1), z
// columns as I(0); the holdout continues the same sample paths.
struct Dataset {
    VectorXd y;
    MatrixXd x;
    MatrixXd z;
    std::optional<Holdout> holdout;
    std::optional<DgpSpec> truth;

    Eigen::Index rows() const { return y.size(); }
    Eigen::Index n1() const { return x.cols(); }
    Eigen::Index n2() const { return z.cols(); }
    Eigen::Index n() const { return x.cols() + z.cols(); }

    // W = (X, Z)
    MatrixXd design() const {
        MatrixXd w(y.size(), n());
        if (x.cols() > 0) w.leftCols(x.cols()) = x;
        if (z.cols() > 0) w.rightCols(z.cols()) = z;
        return w;
    }

    void validate() const {
        if (x.rows() != y.size() || z.rows() != y.size())
            throw std::invalid_argument("Dataset: row counts disagree");
        if (!y.allFinite() || !x.allFinite() || !z.allFinite())
            throw std::invalid_argument("Dataset: non-finite entries");
        if (holdout) {
            const auto& h = *holdout;
            if (h.x.rows() != h.y.size() || h.z.rows() != h.y.size())
                throw std::invalid_argument("Dataset: holdout row counts disagree");
            if (h.x.cols() != x.cols() || h.z.cols() != z.cols())
                throw std::invalid_argument("Dataset: holdout column counts disagree");
            if (!h.y.allFinite() || !h.x.allFinite() || !h.z.allFinite())
                throw std::invalid_argument("Dataset: non-finite holdout entries");
        }
    }
};

// cov(w_i, w_j) = r^{|i-j|}, unit diagonal.
inline MatrixXd toeplitz_cov(int n, double r) {
    if (n < 1) throw std::invalid_argument("toeplitz_cov: n must be >= 1");
    if (r < 0.0 || r >= 1.0)
        throw std::invalid_argument("toeplitz_cov: r must lie in [0,1)");
    MatrixXd cov(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) cov(i, j) = std::pow(r, std::abs(i - j));
    return cov;
}

// Short-run and long-run variance of the error process, in closed form.
// For AR(1) with innovation variance s^2: sigma_uu = s^2/(1-phi^2),
// sigma_uu_star = s^2/(1-phi)^2. Student-t innovations are scaled so the
// innovation standard deviation equals sigma_u, hence the same formulas.
struct LongRunVariance {
    double sigma_uu = 0.0;
    double sigma_uu_star = 0.0;
};

inline LongRunVariance long_run_variance(const ErrorSpec& error, double sigma_u) {
    error.validate();
    if (!(sigma_u > 0.0))
        throw std::invalid_argument("long_run_variance: sigma_u must be positive");
    const double s2 = sigma_u * sigma_u;
    if (error.kind == ErrorKind::iid_gaussian) return {s2, s2};
    const double phi = error.ar_coefficient;
    return {s2 / (1.0 - phi * phi), s2 / ((1.0 - phi) * (1.0 - phi))};
}

namespace detail {

// Seed-derived generator streams: the covariate stream is independent of the
// error stream, so x/z paths do not depend on the error draw count.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t v = seed + salt + 0x9E3779B97F4A7C15ULL;
    v ^= v >> 30;
    v *= 0xBF58476D1CE4E5B9ULL;
    v ^= v >> 27;
    v *= 0x94D049BB133111EBULL;
    v ^= v >> 31;
    return v;
}

constexpr std::uint64_t kCovariateSalt = 0x636F766172696174ULL;
constexpr std::uint64_t kErrorSalt = 0x6572726F72737472ULL;
constexpr int kAr1Burnin = 200;

// u_1..u_n per the error spec; AR(1) paths get a burn-in so the process is
// effectively stationary at the sample start.
inline VectorXd simulate_errors(const ErrorSpec& error, double sigma_u, int n,
                                std::mt19937_64& rng) {
    VectorXd u(n);
    std::normal_distribution<double> gauss(0.0, 1.0);
    switch (error.kind) {
        case ErrorKind::iid_gaussian:
            for (int t = 0; t < n; ++t) u[t] = sigma_u * gauss(rng);
            return u;
        case ErrorKind::ar1_gaussian: {
            const double phi = error.ar_coefficient;
            double state = 0.0;
            for (int t = 0; t < kAr1Burnin; ++t) state = phi * state + sigma_u * gauss(rng);
            for (int t = 0; t < n; ++t) {
                state = phi * state + sigma_u * gauss(rng);
                u[t] = state;
            }
            return u;
        }
        case ErrorKind::ar1_student_t: {
            const double phi = error.ar_coefficient;
            const double df = static_cast<double>(error.student_df);
            // scale so sd(innovation) = sigma_u; var(t_df) = df/(df-2)
            const double scale = sigma_u / std::sqrt(df / (df - 2.0));
            std::student_t_distribution<double> student(df);
            double state = 0.0;
            for (int t = 0; t < kAr1Burnin; ++t) state = phi * state + scale * student(rng);
            for (int t = 0; t < n; ++t) {
                state = phi * state + scale * student(rng);
                u[t] = state;
            }
            return u;
        }
    }
    throw std::logic_error("simulate_errors: unreachable");
}

// Rows are w_t' = (v_t', z_t')' with the leading block Toeplitz-correlated
// and the remaining coordinates independent standard normal.
inline MatrixXd simulate_w(const DgpSpec& spec, int n, std::mt19937_64& rng) {
    const int m = spec.n1 + spec.n2;
    const int block = std::min(spec.corr_block_size, m);
    MatrixXd chol_l;
    if (block > 1) {
        Eigen::LLT<MatrixXd> llt(toeplitz_cov(block, spec.toeplitz_r));
        if (llt.info() != Eigen::Success)
            throw std::runtime_error("simulate: covariance is not positive definite");
        chol_l = llt.matrixL();
    }
    std::normal_distribution<double> gauss(0.0, 1.0);
    MatrixXd w(n, m);
    VectorXd g(m);
    for (int t = 0; t < n; ++t) {
        for (int i = 0; i < m; ++i) g[i] = gauss(rng);
        if (block > 1) g.head(block) = chol_l * g.head(block).eval();
        w.row(t) = g.transpose();
    }
    return w;
}

}  // namespace detail

// Draw T + holdout_len steps of the model; the holdout continues the same
// x random-walk and error paths. Identical (spec, T, holdout_len, seed)
// produce identical datasets.
inline Dataset simulate(const DgpSpec& spec, int T, int holdout_len, std::uint64_t seed) {
    spec.validate();
    if (T < 1) throw std::invalid_argument("simulate: T must be >= 1");
    if (holdout_len < 0) throw std::invalid_argument("simulate: holdout_len must be >= 0");

    const int total = T + holdout_len;
    std::mt19937_64 w_rng(detail::mix_seed(seed, detail::kCovariateSalt));
    std::mt19937_64 u_rng(detail::mix_seed(seed, detail::kErrorSalt));

    const MatrixXd w = detail::simulate_w(spec, total, w_rng);
    const VectorXd u = detail::simulate_errors(spec.error, spec.sigma_u, total, u_rng);

    // x_t = x_{t-1} + v_t with x_0 = 0
    MatrixXd x(total, spec.n1);
    VectorXd acc = VectorXd::Zero(spec.n1);
    for (int t = 0; t < total; ++t) {
        acc += w.row(t).head(spec.n1).transpose();
        x.row(t) = acc.transpose();
    }
    const MatrixXd z = w.rightCols(spec.n2);
    const VectorXd y = VectorXd::Constant(total, spec.alpha0) + x * spec.beta0 + z * spec.gamma0 + u;

    Dataset data;
    data.y = y.head(T);
    data.x = x.topRows(T);
    data.z = z.topRows(T);
    if (holdout_len > 0) {
        Holdout h;
        h.y = y.tail(holdout_len);
        h.x = x.bottomRows(holdout_len);
        h.z = z.bottomRows(holdout_len);
        data.holdout = std::move(h);
    }
    data.truth = spec;
    return data;
}

// The six simulation designs. Coefficients are
// (2.5, 2.5, 1.5, 1.5, 0.5, 0.5, 0, ..., 0)' for both blocks in every model.
inline DgpSpec builtin_model(int id) {
    if (id < 1 || id > 6) throw std::invalid_argument("builtin_model: id must be in 1..6");

    auto effects = [](int n) {
        VectorXd b = VectorXd::Zero(n);
        b[0] = 2.5; b[1] = 2.5; b[2] = 1.5; b[3] = 1.5; b[4] = 0.5; b[5] = 0.5;
        return b;
    };

    DgpSpec spec;
    spec.n1 = (id == 4 || id == 5) ? 50 : 15;
    spec.n2 = spec.n1;
    spec.beta0 = effects(spec.n1);
    spec.gamma0 = effects(spec.n2);
    spec.toeplitz_r = (id == 2) ? 0.9 : 0.5;
    // Model 5: only the leading 15 components of (v', z')' are correlated.
    spec.corr_block_size = (id == 5) ? 15 : spec.n1 + spec.n2;
    spec.sigma_u = 1.5;
    spec.alpha0 = 0.0;
    if (id == 3 || id == 4 || id == 6) {
        spec.error.kind = (id == 6) ? ErrorKind::ar1_student_t : ErrorKind::ar1_gaussian;
        spec.error.ar_coefficient = 0.6;
        spec.error.student_df = 4;
    }
    return spec;
}

}  // namespace cointlasso
