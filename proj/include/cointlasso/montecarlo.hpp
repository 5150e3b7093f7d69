#pragma once

// Simulation study driver: replications of simulate -> tune -> fit ->
// evaluate, oracle-OLS baselines, and the three accuracy summaries
// (selection, estimation, prediction) with bootstrap uncertainty.

#include "dgp.hpp"
#include "diagnostics.hpp"
#include "estimator.hpp"
#include "tuning.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

namespace cointlasso {

struct McConfig {
    int model_id = 1;
    std::optional<DgpSpec> custom_spec;
    std::vector<int> sample_sizes = {50, 100, 200};
    int replications = 500;
    int holdout_len = 50;
    std::uint64_t base_seed = 20240101;
    std::optional<GcvGrid> grid;  // per-T default when unset
    PenaltyConfig penalty;        // lambda1/lambda2 come from tuning per replication
    int jobs = 0;                 // 0 = hardware concurrency
    int bootstrap_draws = 1000;

    DgpSpec spec() const { return custom_spec ? *custom_spec : builtin_model(model_id); }

    void validate() const {
        if (!custom_spec && (model_id < 1 || model_id > 6))
            throw std::invalid_argument("McConfig: model_id must be in 1..6");
        if (replications < 2)
            throw std::invalid_argument("McConfig: replications must be >= 2");
        if (sample_sizes.empty())
            throw std::invalid_argument("McConfig: sample_sizes must be nonempty");
        if (holdout_len < 0) throw std::invalid_argument("McConfig: holdout_len must be >= 0");
        if (bootstrap_draws < 1)
            throw std::invalid_argument("McConfig: bootstrap_draws must be >= 1");
        spec().validate();
    }
};

constexpr std::uint64_t kSeedStride = 1000000007ULL;

inline std::uint64_t replication_seed(std::uint64_t base_seed, int index) {
    return base_seed + static_cast<std::uint64_t>(index) * kSeedStride;
}

struct ReplicationRecord {
    int index = 0;
    std::uint64_t seed = 0;
    int sample_size = 0;
    bool failed = false;
    std::string error;

    double lambda_ridge = 0.0, lambda1 = 0.0, lambda2 = 0.0;
    VectorXd beta_hat, gamma_hat;
    VectorXd se_beta, se_gamma;
    VectorXd beta_oracle, gamma_oracle;
    int iterations = 0;
    bool converged = false;
    bool kkt_pass = false;
    bool sign_ok = false;
    int correct_nonzero = 0;
    int correct_zero = 0;
    double pmse = 0.0;
    double pmse_oracle = 0.0;
    bool event_a = false;
    bool event_b = false;
    double eta_margin = 0.0;
};

struct OracleFit {
    VectorXd beta;   // full length, zeros off the active set
    VectorXd gamma;
    VectorXd holdout_pred;
};

// OLS conditional on knowing the variables that enter the model.
inline OracleFit oracle_ols(const Dataset& data, const std::vector<int>& active_beta,
                            const std::vector<int>& active_gamma) {
    OracleFit out;
    out.beta = VectorXd::Zero(data.n1());
    out.gamma = VectorXd::Zero(data.n2());
    const Eigen::Index q = static_cast<Eigen::Index>(active_beta.size() + active_gamma.size());
    if (q > 0) {
        const MatrixXd w1 = detail::gather_cols(data.x, data.z, active_beta, active_gamma);
        Eigen::ColPivHouseholderQR<MatrixXd> qr(w1);
        if (qr.rank() < q)
            throw std::runtime_error("oracle_ols: restricted design is rank-deficient");
        const VectorXd coef = qr.solve(data.y);
        Eigen::Index k = 0;
        for (int j : active_beta) out.beta[j] = coef[k++];
        for (int j : active_gamma) out.gamma[j] = coef[k++];
    }
    if (data.holdout) {
        out.holdout_pred =
            data.holdout->x * out.beta + data.holdout->z * out.gamma;
    }
    return out;
}

namespace detail {

inline std::vector<int> support(const VectorXd& v) {
    std::vector<int> idx;
    for (Eigen::Index j = 0; j < v.size(); ++j)
        if (v[j] != 0.0) idx.push_back(static_cast<int>(j));
    return idx;
}

inline double pmse(const VectorXd& actual, const VectorXd& pred) {
    return (actual - pred).squaredNorm() / static_cast<double>(actual.size());
}

}  // namespace detail

// One simulate -> tune -> fit -> evaluate pass, fully determined by the seed.
inline ReplicationRecord run_replication(const DgpSpec& spec, int T, int holdout_len,
                                         std::uint64_t seed, const GcvGrid& grid,
                                         const PenaltyConfig& penalty_defaults) {
    ReplicationRecord rec;
    rec.seed = seed;
    rec.sample_size = T;

    const Dataset data = simulate(spec, T, holdout_len, seed);
    const LambdaSelection sel = select_lambdas(data, grid);
    rec.lambda_ridge = sel.lambda_ridge;
    rec.lambda1 = sel.lambda1;
    rec.lambda2 = sel.lambda2;

    PenaltyConfig config = penalty_defaults;
    config.lambda1 = sel.lambda1;
    config.lambda2 = sel.lambda2;
    config.rho = grid.rho;
    const FitResult fit = adaptive_lasso_fit(data, config, sel.lambda_ridge);
    rec.beta_hat = fit.beta_hat;
    rec.gamma_hat = fit.gamma_hat;
    std::tie(rec.se_beta, rec.se_gamma) = standard_errors(fit);
    rec.iterations = fit.iterations;
    rec.converged = fit.converged;
    rec.kkt_pass = check_kkt(data, fit, config, default_kkt_tol(config)).pass;

    const std::vector<int> true_beta = detail::support(spec.beta0);
    const std::vector<int> true_gamma = detail::support(spec.gamma0);
    const OracleFit oracle = oracle_ols(data, true_beta, true_gamma);
    rec.beta_oracle = oracle.beta;
    rec.gamma_oracle = oracle.gamma;

    VectorXd theta0(spec.n1 + spec.n2);
    theta0 << spec.beta0, spec.gamma0;
    rec.sign_ok = sign_match(fit.theta(), theta0);
    for (Eigen::Index j = 0; j < spec.beta0.size(); ++j) {
        if (spec.beta0[j] != 0.0)
            rec.correct_nonzero += fit.beta_hat[j] != 0.0;
        else
            rec.correct_zero += fit.beta_hat[j] == 0.0;
    }
    for (Eigen::Index j = 0; j < spec.gamma0.size(); ++j) {
        if (spec.gamma0[j] != 0.0)
            rec.correct_nonzero += fit.gamma_hat[j] != 0.0;
        else
            rec.correct_zero += fit.gamma_hat[j] == 0.0;
    }

    if (data.holdout) {
        const VectorXd pred = data.holdout->x * fit.beta_hat + data.holdout->z * fit.gamma_hat;
        rec.pmse = detail::pmse(data.holdout->y, pred);
        rec.pmse_oracle = detail::pmse(data.holdout->y, oracle.holdout_pred);
    } else {
        rec.pmse = rec.pmse_oracle = std::numeric_limits<double>::quiet_NaN();
    }

    // sign-recovery events and the IC margin on the true support
    const TheoryContext ctx = build_context(data, true_beta, true_gamma);
    const VectorXd u = data.y - data.x * spec.beta0 - data.z * spec.gamma0 -
                       VectorXd::Constant(data.rows(), spec.alpha0);
    const EventIndicators events =
        event_indicators(data, ctx, config, fit.weights1_final, fit.weights2_final, u);
    rec.event_a = events.a_holds;
    rec.event_b = events.b_holds;
    VectorXd signs(ctx.q());
    Eigen::Index k = 0;
    for (int j : true_beta) signs[k++] = spec.beta0[j] > 0.0 ? 1.0 : -1.0;
    for (int j : true_gamma) signs[k++] = spec.gamma0[j] > 0.0 ? 1.0 : -1.0;
    rec.eta_margin = irrepresentable_stat(ctx, signs).eta_margin;
    return rec;
}

inline double sample_median(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t mid = v.size() / 2;
    if (v.size() % 2 == 1) return v[mid];
    return 0.5 * (v[mid - 1] + v[mid]);
}

inline double sample_mean(const std::vector<double>& v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double sample_sd(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = sample_mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

// Resample-with-replacement distribution of a statistic; returns the mean
// and standard deviation across draws.
template <typename Stat>
inline std::pair<double, double> bootstrap_statistic(const std::vector<double>& values,
                                                     int draws, std::uint64_t seed,
                                                     Stat statistic) {
    if (values.empty()) return {std::numeric_limits<double>::quiet_NaN(), 0.0};
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, values.size() - 1);
    std::vector<double> stats(static_cast<std::size_t>(draws));
    std::vector<double> resample(values.size());
    for (int b = 0; b < draws; ++b) {
        for (std::size_t i = 0; i < values.size(); ++i) resample[i] = values[pick(rng)];
        stats[static_cast<std::size_t>(b)] = statistic(resample);
    }
    return {sample_mean(stats), sample_sd(stats)};
}

constexpr std::uint64_t kBootstrapSalt = 0x626F6F7473747261ULL;

struct SelectionSummary {
    double mean_nonzero = 0.0, sd_nonzero = 0.0;
    double mean_zero = 0.0, sd_zero = 0.0;
};

inline SelectionSummary selection_summary(const std::vector<ReplicationRecord>& records,
                                          int bootstrap_draws = 1000,
                                          std::uint64_t seed = kBootstrapSalt) {
    std::vector<double> nonzero, zero;
    for (const auto& r : records) {
        if (r.failed) continue;
        nonzero.push_back(r.correct_nonzero);
        zero.push_back(r.correct_zero);
    }
    SelectionSummary s;
    s.mean_nonzero = sample_mean(nonzero);
    s.mean_zero = sample_mean(zero);
    s.sd_nonzero = bootstrap_statistic(nonzero, bootstrap_draws, seed,
                                       [](const std::vector<double>& v) { return sample_mean(v); })
                       .second;
    s.sd_zero = bootstrap_statistic(zero, bootstrap_draws, seed + 1,
                                    [](const std::vector<double>& v) { return sample_mean(v); })
                    .second;
    return s;
}

struct CoefSummary {
    std::string name;
    int block = 0;  // 0 = beta, 1 = gamma
    int index = 0;
    double mse = 0.0;
    double mse_oracle = 0.0;
    double ratio = 0.0;
    double mean_sandwich_sd = 0.0;
    double empirical_sd = 0.0;
};

// MSE against the oracle-OLS baseline plus sandwich-vs-resampling SD for the
// reported coefficients (beta1, beta3, beta5, gamma1, gamma3, gamma5).
inline std::vector<CoefSummary> estimation_summary(const std::vector<ReplicationRecord>& records,
                                                   const DgpSpec& spec) {
    std::vector<CoefSummary> out;
    auto add = [&](int block, int index) {
        const VectorXd& truth = block == 0 ? spec.beta0 : spec.gamma0;
        if (index >= truth.size()) return;
        CoefSummary cs;
        cs.block = block;
        cs.index = index;
        cs.name = (block == 0 ? "beta" : "gamma") + std::to_string(index + 1);
        std::vector<double> est, orc, se;
        for (const auto& r : records) {
            if (r.failed) continue;
            est.push_back(block == 0 ? r.beta_hat[index] : r.gamma_hat[index]);
            orc.push_back(block == 0 ? r.beta_oracle[index] : r.gamma_oracle[index]);
            se.push_back(block == 0 ? r.se_beta[index] : r.se_gamma[index]);
        }
        const double t0 = truth[index];
        double mse = 0.0, mse_oracle = 0.0;
        for (double v : est) mse += (v - t0) * (v - t0);
        for (double v : orc) mse_oracle += (v - t0) * (v - t0);
        mse /= std::max<std::size_t>(1, est.size());
        mse_oracle /= std::max<std::size_t>(1, orc.size());
        cs.mse = mse;
        cs.mse_oracle = mse_oracle;
        cs.ratio = mse_oracle > 0.0 ? mse / mse_oracle : std::numeric_limits<double>::quiet_NaN();
        cs.mean_sandwich_sd = sample_mean(se);
        cs.empirical_sd = sample_sd(est);
        out.push_back(std::move(cs));
    };
    for (int idx : {0, 2, 4}) add(0, idx);
    for (int idx : {0, 2, 4}) add(1, idx);
    return out;
}

struct PredictionSummary {
    double mean_median_ratio = 0.0;  // mean of bootstrap medians
    double sd_median_ratio = 0.0;
    double sample_median_ratio = 0.0;
};

inline PredictionSummary prediction_summary(const std::vector<ReplicationRecord>& records,
                                            int bootstrap_draws = 1000,
                                            std::uint64_t seed = kBootstrapSalt + 2) {
    std::vector<double> ratios;
    for (const auto& r : records) {
        if (r.failed || !std::isfinite(r.pmse) || !std::isfinite(r.pmse_oracle)) continue;
        if (r.pmse_oracle > 0.0) ratios.push_back(r.pmse / r.pmse_oracle);
    }
    PredictionSummary p;
    p.sample_median_ratio = sample_median(ratios);
    auto [mean, sd] = bootstrap_statistic(
        ratios, bootstrap_draws, seed,
        [](const std::vector<double>& v) { return sample_median(v); });
    p.mean_median_ratio = mean;
    p.sd_median_ratio = sd;
    return p;
}

struct StudyCell {
    int sample_size = 0;
    std::vector<ReplicationRecord> records;
    SelectionSummary selection;
    std::vector<CoefSummary> estimation;
    PredictionSummary prediction;
    double sign_rate = 0.0;
    double freq_ab = 0.0;
    double mean_lambda1_over_t = 0.0;
    double mean_lambda2_over_sqrt_t = 0.0;
    int n_failed = 0;
    int n_nonconverged = 0;
    bool all_kkt_pass = true;
};

struct StudyResult {
    DgpSpec spec;
    std::string model_label;
    std::vector<StudyCell> cells;
};

// Replications run concurrently; each one is a pure function of its seed, so
// the result does not depend on the number of workers.
inline std::vector<ReplicationRecord> run_replications(const DgpSpec& spec, int T,
                                                       int holdout_len, int replications,
                                                       std::uint64_t base_seed,
                                                       const GcvGrid& grid,
                                                       const PenaltyConfig& penalty,
                                                       int jobs) {
    std::vector<ReplicationRecord> records(static_cast<std::size_t>(replications));
    if (jobs <= 0) jobs = static_cast<int>(std::thread::hardware_concurrency());
    jobs = std::max(1, std::min(jobs, replications));

    std::atomic<int> next{0};
    std::atomic<bool> abort{false};
    std::exception_ptr first_error;
    std::mutex error_mutex;

    auto worker = [&]() {
        while (!abort.load(std::memory_order_relaxed)) {
            const int i = next.fetch_add(1);
            if (i >= replications) break;
            auto& rec = records[static_cast<std::size_t>(i)];
            rec.index = i;
            const std::uint64_t seed = replication_seed(base_seed, i);
            try {
                rec = run_replication(spec, T, holdout_len, seed, grid, penalty);
                rec.index = i;
            } catch (const std::exception& e) {
                rec.failed = true;
                rec.error = e.what();
                rec.seed = seed;
                rec.sample_size = T;
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                abort.store(true);
            }
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(jobs));
    for (int k = 0; k < jobs; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
    return records;
}

inline StudyCell summarize_cell(const DgpSpec& spec, int T,
                                std::vector<ReplicationRecord> records,
                                int bootstrap_draws, std::uint64_t base_seed) {
    StudyCell cell;
    cell.sample_size = T;
    cell.records = std::move(records);
    const std::uint64_t boot_seed =
        detail::mix_seed(base_seed, kBootstrapSalt ^ static_cast<std::uint64_t>(T));
    cell.selection = selection_summary(cell.records, bootstrap_draws, boot_seed);
    cell.estimation = estimation_summary(cell.records, spec);
    cell.prediction = prediction_summary(cell.records, bootstrap_draws, boot_seed + 7);

    int ok = 0, signed_ok = 0, ab = 0;
    double l1_sum = 0.0, l2_sum = 0.0;
    for (const auto& r : cell.records) {
        if (r.failed) {
            ++cell.n_failed;
            continue;
        }
        ++ok;
        signed_ok += r.sign_ok;
        ab += r.event_a && r.event_b;
        l1_sum += r.lambda1 / static_cast<double>(T);
        l2_sum += r.lambda2 / std::sqrt(static_cast<double>(T));
        if (!r.converged)
            ++cell.n_nonconverged;
        else if (!r.kkt_pass)
            cell.all_kkt_pass = false;
    }
    if (ok > 0) {
        cell.sign_rate = static_cast<double>(signed_ok) / ok;
        cell.freq_ab = static_cast<double>(ab) / ok;
        cell.mean_lambda1_over_t = l1_sum / ok;
        cell.mean_lambda2_over_sqrt_t = l2_sum / ok;
    }
    return cell;
}

inline StudyResult run_study(const McConfig& config) {
    config.validate();
    const DgpSpec spec = config.spec();
    StudyResult result;
    result.spec = spec;
    result.model_label =
        config.custom_spec ? "custom" : "model" + std::to_string(config.model_id);
    for (int T : config.sample_sizes) {
        GcvGrid grid = config.grid ? *config.grid
                                   : default_gcv_grid(spec.n1, spec.n2, T, config.penalty.rho);
        auto records = run_replications(spec, T, config.holdout_len, config.replications,
                                        config.base_seed, grid, config.penalty, config.jobs);
        result.cells.push_back(summarize_cell(spec, T, std::move(records),
                                              config.bootstrap_draws, config.base_seed));
    }
    return result;
}

}  // namespace cointlasso
