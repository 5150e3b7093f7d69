// End-to-end checks of the command-line tool, driving the built binary.

#include <cointlasso/io.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using namespace cointlasso;

namespace {

struct RunResult {
    int exit_code;
    std::string output;
};

RunResult run_cli(const std::string& args) {
    const fs::path out = fs::temp_directory_path() / "cointlasso_cli_out.txt";
    const std::string cmd = std::string(COINTLASSO_CLI_PATH) + " " + args + " > " +
                            out.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    std::ifstream in(out.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return {WEXITSTATUS(status), ss.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

int count_lines(const std::string& text) {
    int n = 0;
    for (char c : text) n += c == '\n';
    return n;
}

}  // namespace

TEST_CASE("simulate writes the expected CSV and is byte-stable") {
    const fs::path dir = fresh_dir("cl_sim");
    auto r = run_cli("simulate --model 1 --T 100 --holdout 50 --seed 7 --out " + dir.string());
    REQUIRE(r.exit_code == 0);
    const std::string csv = slurp(dir / "dataset.csv");
    REQUIRE(count_lines(csv) == 151);  // header + 150 rows

    const std::string spec_json = slurp(dir / "spec.json");
    const json j = json::parse(spec_json);
    REQUIRE(j["n1"] == 15);
    REQUIRE(j["toeplitz_r"] == 0.5);

    // repeated invocation: identical bytes
    const fs::path dir2 = fresh_dir("cl_sim2");
    run_cli("simulate --model 1 --T 100 --holdout 50 --seed 7 --out " + dir2.string());
    REQUIRE(slurp(dir2 / "dataset.csv") == csv);
    REQUIRE(slurp(dir2 / "spec.json") == spec_json);

    // model 4: 101 data columns
    const fs::path dir4 = fresh_dir("cl_sim4");
    run_cli("simulate --model 4 --T 30 --holdout 10 --seed 3 --out " + dir4.string());
    const std::string csv4 = slurp(dir4 / "dataset.csv");
    const std::string header = csv4.substr(0, csv4.find('\n'));
    const auto fields = io::split_csv_line(header);
    int data_cols = 0;
    for (const auto& f : fields) data_cols += f != "segment";
    REQUIRE(data_cols == 101);
}

TEST_CASE("simulate output feeds fit cleanly") {
    const fs::path dir = fresh_dir("cl_roundtrip");
    REQUIRE(run_cli("simulate --model 1 --T 150 --holdout 0 --seed 12 --out " + dir.string())
                .exit_code == 0);
    auto fit = run_cli("fit --data " + (dir / "dataset.csv").string() + " --out " +
                       dir.string());
    REQUIRE(fit.exit_code == 0);
    REQUIRE(fit.output.find("kkt=pass") != std::string::npos);
    const json j = json::parse(slurp(dir / "fit.json"));
    REQUIRE(j["converged"] == true);
    REQUIRE(j["kkt"]["pass"] == true);
    REQUIRE(j["beta"].size() == 15);
    // the two dominant effects are always recovered
    const auto active_b = j["active_beta"].get<std::vector<int>>();
    REQUIRE(std::find(active_b.begin(), active_b.end(), 0) != active_b.end());
}

TEST_CASE("fit recovers a clean two-variable dataset to four decimals") {
    const fs::path dir = fresh_dir("cl_fit2");
    // y = 2 x1 - 1 z1, noiseless
    std::ofstream csv(dir / "tiny.csv");
    csv << "y,x1,z1\n";
    double x = 0.0;
    for (int t = 0; t < 60; ++t) {
        x += (t % 3 == 0 ? 1.0 : -0.4);               // a wandering path
        const double z = (t % 7) - 3.0;               // bounded, mean ~0
        csv << io::format_double(2.0 * x - z) << ',' << io::format_double(x) << ','
            << io::format_double(z) << "\n";
    }
    csv.close();
    auto r = run_cli("fit --data " + (dir / "tiny.csv").string() +
                     " --lambda1 0.01 --lambda2 0.01 --lambda-ridge 1e-6 --out " +
                     dir.string());
    REQUIRE(r.exit_code == 0);
    const json j = json::parse(slurp(dir / "fit.json"));
    REQUIRE(j["beta"][0].get<double>() == Catch::Approx(2.0).margin(1e-4));
    REQUIRE(j["gamma"][0].get<double>() == Catch::Approx(-1.0).margin(1e-4));
}

TEST_CASE("fit rejects files with non-numeric cells, reporting the location") {
    const fs::path dir = fresh_dir("cl_nan");
    std::ofstream csv(dir / "bad.csv");
    csv << "y,x1,z1\n1,2,3\n4,nan,6\n";
    csv.close();
    auto r = run_cli("fit --data " + (dir / "bad.csv").string() + " --out " + dir.string());
    REQUIRE(r.exit_code != 0);
    REQUIRE(r.output.find("row 3") != std::string::npos);
    REQUIRE(r.output.find("x1") != std::string::npos);
}

TEST_CASE("tune emits the full surface and a consistent argmin") {
    const fs::path dir = fresh_dir("cl_tune");
    REQUIRE(run_cli("simulate --model 1 --T 80 --holdout 0 --seed 4 --out " + dir.string())
                .exit_code == 0);
    auto r = run_cli("tune --data " + (dir / "dataset.csv").string() + " --out " +
                     dir.string());
    REQUIRE(r.exit_code == 0);
    const std::string surface = slurp(dir / "gcv_surface.csv");
    REQUIRE(count_lines(surface) == 1 + 21 * 21);  // header + default grid

    // argmin reported on stdout matches a re-scan of the emitted CSV
    const json argmin = json::parse(r.output.substr(0, r.output.find('\n')));
    std::istringstream lines(surface);
    std::string line;
    std::getline(lines, line);
    double best = std::numeric_limits<double>::infinity(), l1 = 0, l2 = 0;
    while (std::getline(lines, line)) {
        const auto f = io::split_csv_line(line);
        const double gcv = std::strtod(f[2].c_str(), nullptr);
        if (!std::isfinite(gcv)) continue;
        const double a = std::strtod(f[0].c_str(), nullptr);
        const double b = std::strtod(f[1].c_str(), nullptr);
        if (gcv < best || (gcv == best && a + b > l1 + l2)) {
            best = gcv;
            l1 = a;
            l2 = b;
        }
    }
    REQUIRE(argmin["lambda1"].get<double>() == Catch::Approx(l1).epsilon(1e-12));
    REQUIRE(argmin["lambda2"].get<double>() == Catch::Approx(l2).epsilon(1e-12));
}

TEST_CASE("mc runs a small study deterministically at any job count") {
    const fs::path dir1 = fresh_dir("cl_mc1");
    auto r1 = run_cli("mc --model 1 --T 50 --reps 3 --seed 5 --jobs 1 --records --out " +
                      dir1.string());
    REQUIRE(r1.exit_code == 0);  // all KKT checks passed
    const std::string report1 = slurp(dir1 / "report_model1.csv");
    const std::string md1 = slurp(dir1 / "report_model1.md");
    const std::string recs1 = slurp(dir1 / "records_model1_T50.jsonl");
    REQUIRE(count_lines(recs1) == 3);
    REQUIRE(md1.find("## Model selection accuracy") != std::string::npos);

    const fs::path dir2 = fresh_dir("cl_mc2");
    auto r2 = run_cli("mc --model 1 --T 50 --reps 3 --seed 5 --jobs 2 --records --out " +
                      dir2.string());
    REQUIRE(r2.exit_code == 0);
    REQUIRE(slurp(dir2 / "report_model1.csv") == report1);
    REQUIRE(slurp(dir2 / "report_model1.md") == md1);
    REQUIRE(slurp(dir2 / "records_model1_T50.jsonl") == recs1);
}

TEST_CASE("config file drives the run and flags override it") {
    const fs::path dir = fresh_dir("cl_config");
    std::ofstream cfg(dir / "exp.json");
    cfg << R"({"version":1,"model":1,"T":40,"holdout":10,"seed":9,"out":")"
        << dir.string() << R"("})";
    cfg.close();
    auto r = run_cli("simulate --config " + (dir / "exp.json").string());
    REQUIRE(r.exit_code == 0);
    REQUIRE(count_lines(slurp(dir / "dataset.csv")) == 51);

    // flag override: different seed changes the bytes
    const std::string first = slurp(dir / "dataset.csv");
    auto r2 = run_cli("simulate --config " + (dir / "exp.json").string() + " --seed 10");
    REQUIRE(r2.exit_code == 0);
    REQUIRE(slurp(dir / "dataset.csv") != first);

    // unknown keys are rejected
    std::ofstream bad(dir / "bad.json");
    bad << R"({"version":1,"model":1,"bogus":3})";
    bad.close();
    auto r3 = run_cli("simulate --config " + (dir / "bad.json").string());
    REQUIRE(r3.exit_code != 0);
    REQUIRE(r3.output.find("bogus") != std::string::npos);

    // missing version is rejected
    std::ofstream nover(dir / "nover.json");
    nover << R"({"model":1})";
    nover.close();
    REQUIRE(run_cli("simulate --config " + (dir / "nover.json").string()).exit_code != 0);
}
