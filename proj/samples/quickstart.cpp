// Minimal end-to-end usage: draw a dataset, pick the penalties by GCV,
// fit, and inspect the result.

#include <cointlasso/cointlasso.hpp>

#include <iostream>

int main() {
    using namespace cointlasso;

    // Model 1: 15 integrated + 15 stationary candidates, 6 true effects each.
    const DgpSpec spec = builtin_model(1);
    const Dataset data = simulate(spec, /*T=*/200, /*holdout_len=*/50, /*seed=*/42);

    const GcvGrid grid = default_gcv_grid(spec.n1, spec.n2, 200);
    const LambdaSelection sel = select_lambdas(data, grid);
    std::cout << "GCV picked lambda_ridge=" << sel.lambda_ridge
              << " lambda1=" << sel.lambda1 << " lambda2=" << sel.lambda2 << "\n";

    PenaltyConfig config;
    config.lambda1 = sel.lambda1;
    config.lambda2 = sel.lambda2;
    const FitResult fit = adaptive_lasso_fit(data, config, sel.lambda_ridge);

    const auto [se_beta, se_gamma] = standard_errors(fit);
    std::cout << "converged in " << fit.iterations << " iterations; active x:";
    for (int j : fit.active_beta)
        std::cout << " x" << j + 1 << "=" << fit.beta_hat[j] << "(" << se_beta[j] << ")";
    std::cout << "\nactive z:";
    for (int j : fit.active_gamma)
        std::cout << " z" << j + 1 << "=" << fit.gamma_hat[j] << "(" << se_gamma[j] << ")";
    std::cout << "\n";

    const KktReport kkt = check_kkt(data, fit, config, default_kkt_tol(config));
    std::cout << "KKT check: " << (kkt.pass ? "pass" : "fail") << "\n";

    // out-of-sample accuracy against the oracle fit on the true support
    const OracleFit oracle = oracle_ols(data, {0, 1, 2, 3, 4, 5}, {0, 1, 2, 3, 4, 5});
    const VectorXd pred = data.holdout->x * fit.beta_hat + data.holdout->z * fit.gamma_hat;
    const double pmse = (data.holdout->y - pred).squaredNorm() / 50.0;
    const double pmse_oracle =
        (data.holdout->y - oracle.holdout_pred).squaredNorm() / 50.0;
    std::cout << "holdout PMSE " << pmse << " vs oracle " << pmse_oracle << "\n";
    return 0;
}
