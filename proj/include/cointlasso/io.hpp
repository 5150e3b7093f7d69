#pragma once

// File formats: datasets as CSV (header y,x1..,z1..; holdout rows flagged by
// a trailing `segment` column), DgpSpec and FitResult as JSON, GCV surfaces
// and study reports as CSV, study reports also as markdown tables, and
// replication records as JSON lines.

#include "dgp.hpp"
#include "diagnostics.hpp"
#include "estimator.hpp"
#include "montecarlo.hpp"
#include "tuning.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace cointlasso {

using nlohmann::json;

namespace io {

// Shortest representation that round-trips a double exactly.
inline std::string format_double(double v) {
    if (!std::isfinite(v)) return v > 0 ? "inf" : (v < 0 ? "-inf" : "nan");
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    double back = 0.0;
    std::sscanf(buf, "%lf", &back);
    if (back == v) {
        for (int prec = 1; prec < 17; ++prec) {
            char probe[32];
            std::snprintf(probe, sizeof(probe), "%.*g", prec, v);
            std::sscanf(probe, "%lf", &back);
            if (back == v) return probe;
        }
    }
    return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(field);
            field.clear();
        } else if (c != '\r') {
            field += c;
        }
    }
    fields.push_back(field);
    return fields;
}

inline std::ofstream open_output(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write to " + path);
    return out;
}

}  // namespace io

// ---- Dataset CSV ----

inline void write_dataset_csv(const Dataset& data, std::ostream& out) {
    const Eigen::Index n1 = data.n1();
    const Eigen::Index n2 = data.n2();
    const bool with_segment = data.holdout.has_value();
    out << "y";
    for (Eigen::Index j = 0; j < n1; ++j) out << ",x" << (j + 1);
    for (Eigen::Index j = 0; j < n2; ++j) out << ",z" << (j + 1);
    if (with_segment) out << ",segment";
    out << "\n";
    auto emit = [&](const VectorXd& y, const MatrixXd& x, const MatrixXd& z,
                    const char* segment) {
        for (Eigen::Index t = 0; t < y.size(); ++t) {
            out << io::format_double(y[t]);
            for (Eigen::Index j = 0; j < n1; ++j) out << ',' << io::format_double(x(t, j));
            for (Eigen::Index j = 0; j < n2; ++j) out << ',' << io::format_double(z(t, j));
            if (with_segment) out << ',' << segment;
            out << "\n";
        }
    };
    emit(data.y, data.x, data.z, "train");
    if (data.holdout) emit(data.holdout->y, data.holdout->x, data.holdout->z, "holdout");
}

inline void write_dataset_csv(const Dataset& data, const std::string& path) {
    auto out = io::open_output(path);
    write_dataset_csv(data, out);
}

// Columns named x* are integrated candidates and z* stationary unless
// explicit column lists are given.
inline Dataset read_dataset_csv(std::istream& in,
                                const std::vector<std::string>& x_cols = {},
                                const std::vector<std::string>& z_cols = {}) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("dataset CSV: empty file");
    const auto header = io::split_csv_line(line);

    int y_col = -1, segment_col = -1;
    std::vector<int> x_idx, z_idx;
    auto member = [](const std::vector<std::string>& names, const std::string& name) {
        return std::find(names.begin(), names.end(), name) != names.end();
    };
    for (std::size_t c = 0; c < header.size(); ++c) {
        const std::string& name = header[c];
        if (name == "y") {
            y_col = static_cast<int>(c);
        } else if (name == "segment") {
            segment_col = static_cast<int>(c);
        } else if (!x_cols.empty() || !z_cols.empty()) {
            if (member(x_cols, name))
                x_idx.push_back(static_cast<int>(c));
            else if (member(z_cols, name))
                z_idx.push_back(static_cast<int>(c));
            else
                throw std::runtime_error("dataset CSV: column '" + name +
                                         "' is not declared as x or z");
        } else if (!name.empty() && name[0] == 'x') {
            x_idx.push_back(static_cast<int>(c));
        } else if (!name.empty() && name[0] == 'z') {
            z_idx.push_back(static_cast<int>(c));
        } else {
            throw std::runtime_error("dataset CSV: cannot classify column '" + name + "'");
        }
    }
    if (y_col < 0) throw std::runtime_error("dataset CSV: missing y column");

    std::vector<std::vector<double>> rows;
    std::vector<bool> is_holdout;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = io::split_csv_line(line);
        if (fields.size() != header.size())
            throw std::runtime_error("dataset CSV: row " + std::to_string(line_no) +
                                     " has " + std::to_string(fields.size()) +
                                     " fields, expected " + std::to_string(header.size()));
        std::vector<double> row(header.size(), 0.0);
        for (std::size_t c = 0; c < fields.size(); ++c) {
            if (static_cast<int>(c) == segment_col) continue;
            char* end = nullptr;
            const double v = std::strtod(fields[c].c_str(), &end);
            if (end == fields[c].c_str() || *end != '\0' || !std::isfinite(v))
                throw std::runtime_error("dataset CSV: non-numeric value '" + fields[c] +
                                         "' at row " + std::to_string(line_no) +
                                         ", column " + header[c]);
            row[c] = v;
        }
        rows.push_back(std::move(row));
        is_holdout.push_back(segment_col >= 0 && fields[static_cast<std::size_t>(segment_col)] ==
                                                     "holdout");
    }

    const auto count = [&](bool holdout) {
        Eigen::Index n = 0;
        for (bool h : is_holdout) n += h == holdout;
        return n;
    };
    const Eigen::Index t_train = count(false);
    const Eigen::Index t_hold = count(true);
    if (t_train == 0) throw std::runtime_error("dataset CSV: no training rows");

    Dataset data;
    data.y.resize(t_train);
    data.x.resize(t_train, static_cast<Eigen::Index>(x_idx.size()));
    data.z.resize(t_train, static_cast<Eigen::Index>(z_idx.size()));
    Holdout hold;
    hold.y.resize(t_hold);
    hold.x.resize(t_hold, static_cast<Eigen::Index>(x_idx.size()));
    hold.z.resize(t_hold, static_cast<Eigen::Index>(z_idx.size()));
    Eigen::Index ti = 0, hi = 0;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto& row = rows[r];
        VectorXd* y = is_holdout[r] ? &hold.y : &data.y;
        MatrixXd* x = is_holdout[r] ? &hold.x : &data.x;
        MatrixXd* z = is_holdout[r] ? &hold.z : &data.z;
        const Eigen::Index t = is_holdout[r] ? hi++ : ti++;
        (*y)[t] = row[static_cast<std::size_t>(y_col)];
        for (std::size_t j = 0; j < x_idx.size(); ++j)
            (*x)(t, static_cast<Eigen::Index>(j)) = row[static_cast<std::size_t>(x_idx[j])];
        for (std::size_t j = 0; j < z_idx.size(); ++j)
            (*z)(t, static_cast<Eigen::Index>(j)) = row[static_cast<std::size_t>(z_idx[j])];
    }
    if (t_hold > 0) data.holdout = std::move(hold);
    data.validate();
    return data;
}

inline Dataset read_dataset_csv_file(const std::string& path,
                                     const std::vector<std::string>& x_cols = {},
                                     const std::vector<std::string>& z_cols = {}) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    return read_dataset_csv(in, x_cols, z_cols);
}

// ---- DgpSpec JSON ----

inline std::string to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::iid_gaussian: return "iid_gaussian";
        case ErrorKind::ar1_gaussian: return "ar1_gaussian";
        case ErrorKind::ar1_student_t: return "ar1_student_t";
    }
    throw std::logic_error("unknown ErrorKind");
}

inline ErrorKind error_kind_from_string(const std::string& s) {
    if (s == "iid_gaussian") return ErrorKind::iid_gaussian;
    if (s == "ar1_gaussian") return ErrorKind::ar1_gaussian;
    if (s == "ar1_student_t") return ErrorKind::ar1_student_t;
    throw std::invalid_argument("unknown error kind '" + s + "'");
}

inline json to_json(const DgpSpec& spec) {
    json j;
    j["n1"] = spec.n1;
    j["n2"] = spec.n2;
    j["beta0"] = std::vector<double>(spec.beta0.begin(), spec.beta0.end());
    j["gamma0"] = std::vector<double>(spec.gamma0.begin(), spec.gamma0.end());
    j["toeplitz_r"] = spec.toeplitz_r;
    j["corr_block_size"] = spec.corr_block_size;
    j["sigma_u"] = spec.sigma_u;
    j["alpha0"] = spec.alpha0;
    j["error"] = {{"kind", to_string(spec.error.kind)},
                  {"ar_coefficient", spec.error.ar_coefficient},
                  {"student_df", spec.error.student_df}};
    return j;
}

inline DgpSpec dgp_spec_from_json(const json& j) {
    DgpSpec spec;
    spec.n1 = j.at("n1").get<int>();
    spec.n2 = j.at("n2").get<int>();
    const auto b = j.at("beta0").get<std::vector<double>>();
    const auto g = j.at("gamma0").get<std::vector<double>>();
    spec.beta0 = Eigen::Map<const VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
    spec.gamma0 = Eigen::Map<const VectorXd>(g.data(), static_cast<Eigen::Index>(g.size()));
    spec.toeplitz_r = j.at("toeplitz_r").get<double>();
    spec.corr_block_size = j.at("corr_block_size").get<int>();
    spec.sigma_u = j.at("sigma_u").get<double>();
    spec.alpha0 = j.value("alpha0", 0.0);
    if (j.contains("error")) {
        const auto& e = j.at("error");
        spec.error.kind = error_kind_from_string(e.at("kind").get<std::string>());
        spec.error.ar_coefficient = e.value("ar_coefficient", 0.0);
        spec.error.student_df = e.value("student_df", 4);
    }
    spec.validate();
    return spec;
}

// ---- FitResult / KktReport JSON ----

inline json to_json(const FitResult& fit) {
    auto [se_beta, se_gamma] = standard_errors(fit);
    json j;
    j["beta"] = std::vector<double>(fit.beta_hat.begin(), fit.beta_hat.end());
    j["gamma"] = std::vector<double>(fit.gamma_hat.begin(), fit.gamma_hat.end());
    j["active_beta"] = fit.active_beta;
    j["active_gamma"] = fit.active_gamma;
    j["se_beta"] = std::vector<double>(se_beta.begin(), se_beta.end());
    j["se_gamma"] = std::vector<double>(se_gamma.begin(), se_gamma.end());
    j["iterations"] = fit.iterations;
    j["converged"] = fit.converged;
    j["lambda1"] = fit.lambda1;
    j["lambda2"] = fit.lambda2;
    j["rho"] = fit.rho;
    j["epsilon"] = fit.epsilon;
    j["zero_threshold"] = fit.zero_threshold;
    j["sigma_uu"] = fit.sigma_uu_used;
    j["sigma_uu_star"] = fit.sigma_uu_star_used;
    return j;
}

inline json to_json(const KktReport& report) {
    json j;
    j["score"] = std::vector<double>(report.score.begin(), report.score.end());
    j["bound"] = std::vector<double>(report.bound.begin(), report.bound.end());
    j["residual"] = std::vector<double>(report.residual.begin(), report.residual.end());
    j["ok"] = std::vector<bool>(report.ok.begin(), report.ok.end());
    j["pass"] = report.pass;
    j["tol"] = report.tol;
    return j;
}

// ---- GCV surface CSV ----

inline void write_gcv_surface_csv(const LambdaSelection& sel, std::ostream& out) {
    out << "lambda1,lambda2,gcv,effective_params\n";
    for (const auto& cell : sel.surface) {
        out << io::format_double(cell.lambda1) << ',' << io::format_double(cell.lambda2)
            << ',' << io::format_double(cell.gcv) << ','
            << io::format_double(cell.effective_params) << "\n";
    }
}

// ---- Study report ----

inline void write_report_csv(const StudyResult& study, std::ostream& out) {
    out << "model,T,metric,name,value\n";
    auto row = [&](int T, const std::string& metric, const std::string& name, double value) {
        out << study.model_label << ',' << T << ',' << metric << ',' << name << ','
            << io::format_double(value) << "\n";
    };
    for (const auto& cell : study.cells) {
        const int T = cell.sample_size;
        row(T, "selection", "correct_nonzero_mean", cell.selection.mean_nonzero);
        row(T, "selection", "correct_nonzero_sd", cell.selection.sd_nonzero);
        row(T, "selection", "correct_zero_mean", cell.selection.mean_zero);
        row(T, "selection", "correct_zero_sd", cell.selection.sd_zero);
        for (const auto& cs : cell.estimation) {
            row(T, "mse", cs.name, cs.mse);
            row(T, "mse_oracle", cs.name, cs.mse_oracle);
            row(T, "mse_ratio", cs.name, cs.ratio);
            row(T, "sd_sandwich_mean", cs.name, cs.mean_sandwich_sd);
            row(T, "sd_empirical", cs.name, cs.empirical_sd);
        }
        row(T, "pmse_ratio", "median_mean", cell.prediction.mean_median_ratio);
        row(T, "pmse_ratio", "median_sd", cell.prediction.sd_median_ratio);
        row(T, "pmse_ratio", "sample_median", cell.prediction.sample_median_ratio);
        row(T, "rates", "sign_consistency", cell.sign_rate);
        row(T, "rates", "freq_ab", cell.freq_ab);
        row(T, "rates", "mean_lambda1_over_T", cell.mean_lambda1_over_t);
        row(T, "rates", "mean_lambda2_over_sqrtT", cell.mean_lambda2_over_sqrt_t);
        row(T, "counts", "failed", cell.n_failed);
        row(T, "counts", "nonconverged", cell.n_nonconverged);
        row(T, "counts", "kkt_all_pass", cell.all_kkt_pass ? 1.0 : 0.0);
    }
}

namespace io {

inline std::string fixed(double v, int digits = 3) {
    if (!std::isfinite(v)) return "-";
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

}  // namespace io

// Markdown tables: selection accuracy, estimation MSE vs oracle, estimated
// vs empirical SD, and relative PMSE.
inline void write_report_markdown(const StudyResult& study, std::ostream& out) {
    out << "# Simulation report: " << study.model_label << "\n\n";

    out << "## Model selection accuracy\n\n";
    out << "| T | correct non-zero (sd) | correct zero (sd) |\n";
    out << "|---:|---:|---:|\n";
    for (const auto& cell : study.cells) {
        out << "| " << cell.sample_size << " | "
            << io::fixed(cell.selection.mean_nonzero, 2) << " ("
            << io::fixed(cell.selection.sd_nonzero, 2) << ") | "
            << io::fixed(cell.selection.mean_zero, 2) << " ("
            << io::fixed(cell.selection.sd_zero, 2) << ") |\n";
    }
    out << "\n";

    auto coef_header = [&](const StudyCell& cell) {
        out << "| T |";
        for (const auto& cs : cell.estimation) out << ' ' << cs.name << " |";
        out << "\n|---:|";
        for (std::size_t i = 0; i < cell.estimation.size(); ++i) out << "---:|";
        out << "\n";
    };

    if (!study.cells.empty()) {
        out << "## Estimation MSE (adaptive Lasso / oracle OLS)\n\n";
        coef_header(study.cells.front());
        for (const auto& cell : study.cells) {
            out << "| " << cell.sample_size << " |";
            for (const auto& cs : cell.estimation)
                out << ' ' << io::fixed(cs.mse, 4) << " / " << io::fixed(cs.mse_oracle, 4)
                    << " |";
            out << "\n";
        }
        out << "\n";

        out << "## Standard deviation (sandwich / resampling)\n\n";
        coef_header(study.cells.front());
        for (const auto& cell : study.cells) {
            out << "| " << cell.sample_size << " |";
            for (const auto& cs : cell.estimation)
                out << ' ' << io::fixed(cs.mean_sandwich_sd, 4) << " / "
                    << io::fixed(cs.empirical_sd, 4) << " |";
            out << "\n";
        }
        out << "\n";
    }

    out << "## Relative PMSE (median, bootstrap)\n\n";
    out << "| T | median PMSE ratio (sd) |\n";
    out << "|---:|---:|\n";
    for (const auto& cell : study.cells) {
        out << "| " << cell.sample_size << " | "
            << io::fixed(cell.prediction.mean_median_ratio, 3) << " ("
            << io::fixed(cell.prediction.sd_median_ratio, 3) << ") |\n";
    }
    out << "\n";
}

// ---- Replication records as JSON lines ----

inline json to_json(const ReplicationRecord& rec) {
    json j;
    j["index"] = rec.index;
    j["seed"] = rec.seed;
    j["T"] = rec.sample_size;
    j["failed"] = rec.failed;
    if (rec.failed) {
        j["error"] = rec.error;
        return j;
    }
    j["lambda_ridge"] = rec.lambda_ridge;
    j["lambda1"] = rec.lambda1;
    j["lambda2"] = rec.lambda2;
    j["beta"] = std::vector<double>(rec.beta_hat.begin(), rec.beta_hat.end());
    j["gamma"] = std::vector<double>(rec.gamma_hat.begin(), rec.gamma_hat.end());
    j["se_beta"] = std::vector<double>(rec.se_beta.begin(), rec.se_beta.end());
    j["se_gamma"] = std::vector<double>(rec.se_gamma.begin(), rec.se_gamma.end());
    j["beta_oracle"] = std::vector<double>(rec.beta_oracle.begin(), rec.beta_oracle.end());
    j["gamma_oracle"] = std::vector<double>(rec.gamma_oracle.begin(), rec.gamma_oracle.end());
    j["iterations"] = rec.iterations;
    j["converged"] = rec.converged;
    j["kkt_pass"] = rec.kkt_pass;
    j["sign_ok"] = rec.sign_ok;
    j["correct_nonzero"] = rec.correct_nonzero;
    j["correct_zero"] = rec.correct_zero;
    j["pmse"] = rec.pmse;
    j["pmse_oracle"] = rec.pmse_oracle;
    j["event_a"] = rec.event_a;
    j["event_b"] = rec.event_b;
    j["eta_margin"] = rec.eta_margin;
    return j;
}

inline void write_records_jsonl(const std::vector<ReplicationRecord>& records,
                                std::ostream& out) {
    for (const auto& rec : records) out << to_json(rec).dump() << "\n";
}

}  // namespace cointlasso
