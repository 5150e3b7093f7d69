// Command-line front end: simulate | fit | tune | mc.
// Configuration comes from an optional versioned JSON file plus flags;
// flags override file values. All randomness flows from --seed.

#include <cointlasso/cointlasso.hpp>

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace cointlasso;

namespace {

struct ExperimentConfig {
    std::uint64_t seed = 1;
    int jobs = 0;
    std::string out = ".";
    int model = 1;
    std::optional<DgpSpec> spec;
    int T = 100;
    std::vector<int> sample_sizes;
    int reps = 500;
    int holdout = 50;
    double rho = 0.9;
    std::optional<double> lambda1;
    std::optional<double> lambda2;
    std::optional<double> lambda_ridge;
    PenaltyConfig penalty;
    std::optional<GcvGrid> grid;
    std::string data_path;
    std::vector<std::string> x_cols;
    std::vector<std::string> z_cols;
    bool records = false;
    bool center = false;
    int bootstrap_draws = 1000;
};

void reject_unknown(const json& j, const std::set<std::string>& allowed,
                    const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!allowed.count(it.key()))
            throw std::runtime_error("config: unknown key '" + it.key() + "' in " + where);
    }
}

GcvGrid grid_from_json(const json& j, double rho) {
    reject_unknown(j, {"ridge", "lambda1", "lambda2"}, "grid");
    GcvGrid grid;
    grid.ridge_grid = j.at("ridge").get<std::vector<double>>();
    grid.lambda1_grid = j.at("lambda1").get<std::vector<double>>();
    grid.lambda2_grid = j.at("lambda2").get<std::vector<double>>();
    grid.rho = rho;
    grid.validate();
    return grid;
}

ExperimentConfig load_config(const std::string& path) {
    ExperimentConfig cfg;
    if (path.empty()) return cfg;
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read config file " + path);
    json j = json::parse(in);
    reject_unknown(j, {"version", "seed", "jobs", "out", "model", "spec", "T",
                       "sample_sizes", "reps", "holdout", "rho", "lambda1", "lambda2",
                       "lambda_ridge", "penalty", "grid", "data", "x_cols", "z_cols",
                       "records", "center", "bootstrap_draws"},
                   "top level");
    if (!j.contains("version") || j.at("version").get<int>() != 1)
        throw std::runtime_error("config: missing or unsupported schema version (expected 1)");
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("jobs")) cfg.jobs = j.at("jobs").get<int>();
    if (j.contains("out")) cfg.out = j.at("out").get<std::string>();
    if (j.contains("model")) cfg.model = j.at("model").get<int>();
    if (j.contains("spec")) cfg.spec = dgp_spec_from_json(j.at("spec"));
    if (j.contains("T")) cfg.T = j.at("T").get<int>();
    if (j.contains("sample_sizes"))
        cfg.sample_sizes = j.at("sample_sizes").get<std::vector<int>>();
    if (j.contains("reps")) cfg.reps = j.at("reps").get<int>();
    if (j.contains("holdout")) cfg.holdout = j.at("holdout").get<int>();
    if (j.contains("rho")) cfg.rho = j.at("rho").get<double>();
    if (j.contains("lambda1")) cfg.lambda1 = j.at("lambda1").get<double>();
    if (j.contains("lambda2")) cfg.lambda2 = j.at("lambda2").get<double>();
    if (j.contains("lambda_ridge")) cfg.lambda_ridge = j.at("lambda_ridge").get<double>();
    if (j.contains("penalty")) {
        const auto& p = j.at("penalty");
        reject_unknown(p, {"epsilon", "zero_threshold", "max_iter", "tol", "weight_cap",
                           "ar_order"},
                       "penalty");
        if (p.contains("epsilon")) cfg.penalty.epsilon = p.at("epsilon").get<double>();
        if (p.contains("zero_threshold"))
            cfg.penalty.zero_threshold = p.at("zero_threshold").get<double>();
        if (p.contains("max_iter")) cfg.penalty.max_iter = p.at("max_iter").get<int>();
        if (p.contains("tol")) cfg.penalty.tol = p.at("tol").get<double>();
        if (p.contains("weight_cap")) cfg.penalty.weight_cap = p.at("weight_cap").get<double>();
        if (p.contains("ar_order")) cfg.penalty.ar_order = p.at("ar_order").get<int>();
    }
    if (j.contains("grid")) cfg.grid = grid_from_json(j.at("grid"), cfg.rho);
    if (j.contains("data")) cfg.data_path = j.at("data").get<std::string>();
    if (j.contains("x_cols")) cfg.x_cols = j.at("x_cols").get<std::vector<std::string>>();
    if (j.contains("z_cols")) cfg.z_cols = j.at("z_cols").get<std::vector<std::string>>();
    if (j.contains("records")) cfg.records = j.at("records").get<bool>();
    if (j.contains("center")) cfg.center = j.at("center").get<bool>();
    if (j.contains("bootstrap_draws"))
        cfg.bootstrap_draws = j.at("bootstrap_draws").get<int>();
    return cfg;
}

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stoi(tok));
    return out;
}

std::vector<std::string> parse_name_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(tok);
    return out;
}

fs::path ensure_out_dir(const std::string& out) {
    fs::path dir(out);
    if (!dir.empty()) fs::create_directories(dir);
    return dir;
}

DgpSpec resolve_spec(const ExperimentConfig& cfg) {
    return cfg.spec ? *cfg.spec : builtin_model(cfg.model);
}

void center_columns(Dataset& data) {
    const double ymean = data.y.mean();
    data.y.array() -= ymean;
    for (Eigen::Index j = 0; j < data.z.cols(); ++j) {
        const double m = data.z.col(j).mean();
        data.z.col(j).array() -= m;
        if (data.holdout) data.holdout->z.col(j).array() -= m;
    }
    if (data.holdout) data.holdout->y.array() -= ymean;
}

int cmd_simulate(const ExperimentConfig& cfg) {
    const DgpSpec spec = resolve_spec(cfg);
    const Dataset data = simulate(spec, cfg.T, cfg.holdout, cfg.seed);
    const fs::path dir = ensure_out_dir(cfg.out);
    const fs::path csv = dir / "dataset.csv";
    const fs::path sidecar = dir / "spec.json";
    write_dataset_csv(data, csv.string());
    {
        auto out = io::open_output(sidecar.string());
        out << to_json(spec).dump(2) << "\n";
    }
    std::cout << "wrote " << csv.string() << " (" << data.rows() << " train + "
              << (data.holdout ? data.holdout->y.size() : 0) << " holdout rows, "
              << (1 + data.n()) << " data columns)\n";
    std::cout << "wrote " << sidecar.string() << "\n";
    return 0;
}

Dataset load_data(const ExperimentConfig& cfg) {
    if (cfg.data_path.empty())
        throw std::runtime_error("no input data: pass --data or config 'data'");
    Dataset data = read_dataset_csv_file(cfg.data_path, cfg.x_cols, cfg.z_cols);
    return data;
}

int cmd_fit(const ExperimentConfig& cfg) {
    Dataset data = load_data(cfg);
    if (cfg.center) center_columns(data);

    PenaltyConfig config = cfg.penalty;
    config.rho = cfg.rho;
    double lambda_ridge;
    if (cfg.lambda1 && cfg.lambda2) {
        config.lambda1 = *cfg.lambda1;
        config.lambda2 = *cfg.lambda2;
        GcvGrid grid = cfg.grid ? *cfg.grid
                                : default_gcv_grid(static_cast<int>(data.n1()),
                                                   static_cast<int>(data.n2()),
                                                   static_cast<int>(data.rows()), cfg.rho);
        lambda_ridge = cfg.lambda_ridge ? *cfg.lambda_ridge : select_ridge(data, grid);
    } else {
        GcvGrid grid = cfg.grid ? *cfg.grid
                                : default_gcv_grid(static_cast<int>(data.n1()),
                                                   static_cast<int>(data.n2()),
                                                   static_cast<int>(data.rows()), cfg.rho);
        const LambdaSelection sel = select_lambdas(data, grid);
        config.lambda1 = sel.lambda1;
        config.lambda2 = sel.lambda2;
        lambda_ridge = cfg.lambda_ridge ? *cfg.lambda_ridge : sel.lambda_ridge;
    }

    const FitResult fit = adaptive_lasso_fit(data, config, lambda_ridge);
    const KktReport kkt = check_kkt(data, fit, config, default_kkt_tol(config));

    const fs::path dir = ensure_out_dir(cfg.out);
    const fs::path path = dir / "fit.json";
    {
        json j = to_json(fit);
        j["lambda_ridge"] = lambda_ridge;
        j["kkt"] = to_json(kkt);
        auto out = io::open_output(path.string());
        out << j.dump(2) << "\n";
    }

    auto [se_beta, se_gamma] = standard_errors(fit);
    std::cout << "fit: T=" << data.rows() << " n1=" << data.n1() << " n2=" << data.n2()
              << " lambda_ridge=" << lambda_ridge << " lambda1=" << config.lambda1
              << " lambda2=" << config.lambda2 << "\n";
    std::cout << "iterations=" << fit.iterations << " converged="
              << (fit.converged ? "yes" : "no") << " kkt=" << (kkt.pass ? "pass" : "FAIL")
              << "\n";
    std::cout << "active variables:\n";
    for (int j : fit.active_beta)
        std::cout << "  x" << (j + 1) << " = " << fit.beta_hat[j] << " (se "
                  << se_beta[j] << ")\n";
    for (int j : fit.active_gamma)
        std::cout << "  z" << (j + 1) << " = " << fit.gamma_hat[j] << " (se "
                  << se_gamma[j] << ")\n";
    if (fit.active_beta.empty() && fit.active_gamma.empty()) std::cout << "  (none)\n";
    std::cout << "wrote " << path.string() << "\n";
    return 0;
}

int cmd_tune(const ExperimentConfig& cfg) {
    Dataset data = load_data(cfg);
    GcvGrid grid = cfg.grid ? *cfg.grid
                            : default_gcv_grid(static_cast<int>(data.n1()),
                                               static_cast<int>(data.n2()),
                                               static_cast<int>(data.rows()), cfg.rho);
    const LambdaSelection sel = select_lambdas(data, grid);
    const fs::path dir = ensure_out_dir(cfg.out);
    const fs::path path = dir / "gcv_surface.csv";
    {
        auto out = io::open_output(path.string());
        write_gcv_surface_csv(sel, out);
    }
    json j;
    j["lambda_ridge"] = sel.lambda_ridge;
    j["lambda1"] = sel.lambda1;
    j["lambda2"] = sel.lambda2;
    j["gcv"] = sel.gcv;
    std::cout << j.dump() << "\n";
    std::cout << "wrote " << path.string() << " (" << sel.surface.size() << " cells)\n";
    return 0;
}

int cmd_mc(const ExperimentConfig& cfg) {
    McConfig mc;
    mc.model_id = cfg.model;
    mc.custom_spec = cfg.spec;
    if (!cfg.sample_sizes.empty()) mc.sample_sizes = cfg.sample_sizes;
    mc.replications = cfg.reps;
    mc.holdout_len = cfg.holdout;
    mc.base_seed = cfg.seed;
    mc.grid = cfg.grid;
    mc.penalty = cfg.penalty;
    mc.penalty.rho = cfg.rho;
    mc.jobs = cfg.jobs;
    mc.bootstrap_draws = cfg.bootstrap_draws;

    const StudyResult study = run_study(mc);
    const fs::path dir = ensure_out_dir(cfg.out);
    const fs::path csv = dir / ("report_" + study.model_label + ".csv");
    const fs::path md = dir / ("report_" + study.model_label + ".md");
    {
        auto out = io::open_output(csv.string());
        write_report_csv(study, out);
    }
    {
        auto out = io::open_output(md.string());
        write_report_markdown(study, out);
    }
    bool all_kkt = true;
    for (const auto& cell : study.cells) {
        if (cfg.records) {
            const fs::path rec = dir / ("records_" + study.model_label + "_T" +
                                        std::to_string(cell.sample_size) + ".jsonl");
            auto out = io::open_output(rec.string());
            write_records_jsonl(cell.records, out);
        }
        std::cout << study.model_label << " T=" << cell.sample_size
                  << ": nonzero " << cell.selection.mean_nonzero << " ("
                  << cell.selection.sd_nonzero << "), zero " << cell.selection.mean_zero
                  << " (" << cell.selection.sd_zero << "), sign rate " << cell.sign_rate
                  << ", pmse ratio " << cell.prediction.mean_median_ratio;
        if (cell.n_failed > 0) std::cout << ", failed " << cell.n_failed;
        if (cell.n_nonconverged > 0) std::cout << ", nonconverged " << cell.n_nonconverged;
        std::cout << (cell.all_kkt_pass ? "" : ", KKT FAIL") << "\n";
        all_kkt = all_kkt && cell.all_kkt_pass;
    }
    std::cout << "wrote " << csv.string() << "\n";
    std::cout << "wrote " << md.string() << "\n";
    return all_kkt ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"adaptive Lasso for cointegration regressions"};
    app.require_subcommand(1);

    // flag storage; values are applied over the config file after parsing
    std::string config_path;
    std::uint64_t seed = 0;
    int jobs = 0, model = 0, T = 0, reps = 0, holdout = -1;
    double rho = 0.0;
    std::string out, data_path, sample_sizes_str, x_cols_str, z_cols_str;
    double lambda1 = 0.0, lambda2 = 0.0, lambda_ridge = 0.0;
    int ar_order = -1;
    bool records = false, center = false;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON config file (flags override)");
        cmd->add_option("--seed", seed, "master RNG seed");
        cmd->add_option("--jobs", jobs, "worker threads (0 = all cores)");
        cmd->add_option("--out", out, "output directory");
        cmd->add_option("--rho", rho, "weight exponent (default 0.9)");
    };

    CLI::App* sim = app.add_subcommand("simulate", "draw a dataset and write CSV + spec JSON");
    add_common(sim);
    sim->add_option("--model", model, "built-in model 1..6");
    sim->add_option("--T", T, "training sample size");
    sim->add_option("--holdout", holdout, "holdout length (default 50)");

    CLI::App* fit = app.add_subcommand("fit", "tune (unless lambdas given) and fit a CSV dataset");
    add_common(fit);
    fit->add_option("--data", data_path, "input dataset CSV");
    fit->add_option("--x-cols", x_cols_str, "comma-separated integrated columns");
    fit->add_option("--z-cols", z_cols_str, "comma-separated stationary columns");
    fit->add_option("--lambda1", lambda1, "fix lambda1 (skip tuning with --lambda2)");
    fit->add_option("--lambda2", lambda2, "fix lambda2 (skip tuning with --lambda1)");
    fit->add_option("--lambda-ridge", lambda_ridge, "fix the ridge initialization level");
    fit->add_option("--ar-order", ar_order, "AR order for the residual variance plug-in");
    fit->add_flag("--center", center, "center Y and Z columns before fitting");

    CLI::App* tune = app.add_subcommand("tune", "emit the GCV surface and its argmin");
    add_common(tune);
    tune->add_option("--data", data_path, "input dataset CSV");
    tune->add_option("--x-cols", x_cols_str, "comma-separated integrated columns");
    tune->add_option("--z-cols", z_cols_str, "comma-separated stationary columns");

    CLI::App* mc = app.add_subcommand("mc", "run the Monte Carlo study");
    add_common(mc);
    mc->add_option("--model", model, "built-in model 1..6");
    mc->add_option("--T", sample_sizes_str, "comma-separated sample sizes");
    mc->add_option("--reps", reps, "replications per sample size");
    mc->add_option("--holdout", holdout, "holdout length (default 50)");
    mc->add_flag("--records", records, "write per-replication JSONL records");

    CLI11_PARSE(app, argc, argv);

    try {
        ExperimentConfig cfg = load_config(config_path);
        auto applied = [&](CLI::App* cmd, const std::string& name) {
            return cmd->count(name) > 0;
        };
        CLI::App* cmd = app.get_subcommands().front();
        if (applied(cmd, "--seed")) cfg.seed = seed;
        if (applied(cmd, "--jobs")) cfg.jobs = jobs;
        if (applied(cmd, "--out")) cfg.out = out;
        if (applied(cmd, "--rho")) cfg.rho = rho;
        if (cmd->get_option_no_throw("--model") && applied(cmd, "--model")) cfg.model = model;
        if (cmd->get_option_no_throw("--T") && applied(cmd, "--T")) {
            if (cmd == mc)
                cfg.sample_sizes = parse_int_list(sample_sizes_str);
            else
                cfg.T = T;
        }
        if (cmd->get_option_no_throw("--holdout") && applied(cmd, "--holdout"))
            cfg.holdout = holdout;
        if (cmd->get_option_no_throw("--reps") && applied(cmd, "--reps")) cfg.reps = reps;
        if (cmd->get_option_no_throw("--data") && applied(cmd, "--data"))
            cfg.data_path = data_path;
        if (cmd->get_option_no_throw("--x-cols") && applied(cmd, "--x-cols"))
            cfg.x_cols = parse_name_list(x_cols_str);
        if (cmd->get_option_no_throw("--z-cols") && applied(cmd, "--z-cols"))
            cfg.z_cols = parse_name_list(z_cols_str);
        if (cmd->get_option_no_throw("--lambda1") && applied(cmd, "--lambda1"))
            cfg.lambda1 = lambda1;
        if (cmd->get_option_no_throw("--lambda2") && applied(cmd, "--lambda2"))
            cfg.lambda2 = lambda2;
        if (cmd->get_option_no_throw("--lambda-ridge") && applied(cmd, "--lambda-ridge"))
            cfg.lambda_ridge = lambda_ridge;
        if (cmd->get_option_no_throw("--ar-order") && applied(cmd, "--ar-order"))
            cfg.penalty.ar_order = ar_order;
        if (cmd->get_option_no_throw("--records") && applied(cmd, "--records"))
            cfg.records = records;
        if (cmd->get_option_no_throw("--center") && applied(cmd, "--center"))
            cfg.center = center;

        if (cmd == sim) return cmd_simulate(cfg);
        if (cmd == fit) return cmd_fit(cfg);
        if (cmd == tune) return cmd_tune(cfg);
        if (cmd == mc) return cmd_mc(cfg);
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
