// End-to-end tests for the airls command line tool: every subcommand is
// exercised through a real process spawn, checking files, exit codes, and the
// documented output contracts.
#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

#ifndef AIRLS_CLI_PATH
#error "AIRLS_CLI_PATH must point at the airls executable"
#endif

namespace {

// Runs a shell command single-threaded (the tool is documented to be
// bit-reproducible under AIRLS_THREADS=1) and returns its exit code.
int run(const std::string& cmd) {
    const std::string full = "AIRLS_THREADS=1 " + cmd;
    const int status = std::system(full.c_str());
    if (status == -1) return -1;
    if (WIFEXITED(status)) return WEXITSTATUS(status);
    return -1;
}

std::string cli() { return std::string("'") + AIRLS_CLI_PATH + "'"; }

// Fresh per-test scratch directory under the test working directory.
fs::path scratch(const std::string& name) {
    const fs::path dir = fs::path("cli_scratch") / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE_MESSAGE(in.good(), "cannot open ", path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json slurp_json(const fs::path& path) { return json::parse(slurp(path)); }

std::vector<std::vector<double>> parse_csv_matrix(const std::string& text) {
    std::vector<std::vector<double>> rows;
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::istringstream cells(line);
        std::string cell;
        while (std::getline(cells, cell, ',')) row.push_back(std::stod(cell));
        rows.push_back(std::move(row));
    }
    return rows;
}

struct GeneratorCase {
    std::string name;
    std::string params;  // key=value arguments appended to generate
    std::string block;   // variance target
};

}  // namespace

TEST_CASE("generate, solve, and variance round-trip for every generator") {
    const std::vector<GeneratorCase> cases = {
        {"supply_demand", "T=2 n_T=1 noise_ratio=0.01", "tau"},
        {"admittance", "n_nodes=3 n_samples=5 noise_level=1e-3 prior_weight=1", "Y_0"},
        {"eiv_sysid", "n_x=2 n_u=1 T=30 outlier_ratio=0 noise_level=0.01", "Theta"},
        {"water", "T=5 noise_ratio=0.01", "R"},
        {"gpca", "n_subspaces=2 dim=3 n_points=40", "normal_0"},
        {"tensor_regression", "n1=3 n2=3 n_samples=25", "factor_left"},
    };
    for (const GeneratorCase& c : cases) {
        CAPTURE(c.name);
        const fs::path dir = scratch("roundtrip_" + c.name);
        const fs::path problem = dir / "problem.json";
        const fs::path truth = dir / "problem.truth.json";
        const fs::path report = dir / "solve.json";
        const fs::path trace = dir / "solve.trace.csv";
        const fs::path var_report = dir / "var.json";
        const fs::path sigma = dir / "var.sigma.csv";

        REQUIRE(run(cli() + " generate " + c.name + " " + c.params + " --seed 3 --out '" +
                    problem.string() + "' > /dev/null") == 0);
        REQUIRE(fs::exists(problem));
        REQUIRE(fs::exists(truth));
        const json truth_doc = slurp_json(truth);
        CHECK(truth_doc.at("generator") == c.name);
        const std::size_t dim = truth_doc.at("x_true").size();
        CHECK(dim > 0);

        REQUIRE(run(cli() + " solve '" + problem.string() + "' --out '" + report.string() +
                    "'") == 0);
        const json solve_doc = slurp_json(report);
        const std::string status = solve_doc.at("status").get<std::string>();
        CHECK_MESSAGE((status == "converged" || status == "max_sweeps" || status == "stalled"),
                      status);
        CHECK(solve_doc.at("x_hat").size() == dim);
        // Trace defaults to the report path with a .trace.csv suffix.
        const std::string trace_text = slurp(trace);
        CHECK(trace_text.rfind("sweep,L,Ghat,G,max_block_delta,elapsed_s\n", 0) == 0);

        REQUIRE(run(cli() + " variance '" + problem.string() + "' '" + report.string() +
                    "' --block " + c.block + " --method prop1 --samples 16 --scale 1e-4 --out '" +
                    var_report.string() + "'") == 0);
        const json var_doc = slurp_json(var_report);
        CHECK(var_doc.at("method") == "prop1");
        const double norm = var_doc.at("spectral_norm").get<double>();
        CHECK(std::isfinite(norm));
        CHECK(norm >= 0.0);
        const auto sigma_rows = parse_csv_matrix(slurp(sigma));
        const std::size_t block_size = [&] {
            for (const json& b : truth_doc.at("blocks"))
                if (b.at("name") == c.block) return b.at("size").get<std::size_t>();
            return std::size_t{0};
        }();
        REQUIRE(sigma_rows.size() == block_size);
        for (const auto& row : sigma_rows) CHECK(row.size() == block_size);
    }
}

TEST_CASE("solve trace honors the sweep budget and reports max_sweeps") {
    const fs::path dir = scratch("budget");
    const fs::path problem = dir / "p.json";
    const fs::path report = dir / "r.json";
    const fs::path trace = dir / "t.csv";
    REQUIRE(run(cli() + " generate supply_demand T=2 n_T=1 --seed 1 --out '" + problem.string() +
                "' > /dev/null") == 0);
    // Stopping at the sweep budget is still a successful run (exit 0).
    REQUIRE(run(cli() + " solve '" + problem.string() + "' --max-sweeps 1 --out '" +
                report.string() + "' --trace '" + trace.string() + "'") == 0);
    const json doc = slurp_json(report);
    CHECK(doc.at("status") == "max_sweeps");
    CHECK(doc.at("sweeps") == 1);
    const auto lines = [&] {
        std::vector<std::string> out;
        std::istringstream ss(slurp(trace));
        std::string line;
        while (std::getline(ss, line))
            if (!line.empty()) out.push_back(line);
        return out;
    }();
    REQUIRE(lines.size() == 2);  // header + exactly one sweep
    CHECK(lines[0] == "sweep,L,Ghat,G,max_block_delta,elapsed_s");
    CHECK(lines[1].rfind("1,", 0) == 0);
}

TEST_CASE("usage and validation errors exit with code 2") {
    const fs::path dir = scratch("usage");
    const fs::path problem = dir / "p.json";
    const fs::path report = dir / "r.json";
    REQUIRE(run(cli() + " generate supply_demand T=2 n_T=1 --seed 1 --out '" + problem.string() +
                "' > /dev/null") == 0);
    REQUIRE(run(cli() + " solve '" + problem.string() + "' --out '" + report.string() + "'") == 0);

    CHECK(run(cli() + " generate no_such_generator 2> /dev/null > /dev/null") == 2);
    CHECK(run(cli() + " generate supply_demand bogus=1 --out '" + (dir / "x.json").string() +
              "' 2> /dev/null > /dev/null") == 2);
    CHECK(run(cli() + " solve '" + (dir / "missing.json").string() + "' 2> /dev/null") == 2);
    CHECK(run(cli() + " solve '" + problem.string() + "' --alpha 0 2> /dev/null") == 2);
    CHECK(run(cli() + " solve '" + problem.string() + "' --order sideways 2> /dev/null") == 2);
    CHECK(run(cli() + " variance '" + problem.string() + "' '" + report.string() +
              "' --block tau --samples 1 2> /dev/null") == 2);
    CHECK(run(cli() + " variance '" + problem.string() + "' '" + report.string() +
              "' --block nope 2> /dev/null") == 2);

    // The resampling oracle needs generator metadata: a problem file without
    // it is a usage error, not a crash.
    json stripped = slurp_json(problem);
    stripped.erase("metadata");
    std::ofstream(dir / "bare.json") << stripped.dump(2) << "\n";
    CHECK(run(cli() + " variance '" + (dir / "bare.json").string() + "' '" + report.string() +
              "' --block tau --method resampling --samples 4 --out '" +
              (dir / "v.json").string() + "' 2> /dev/null") == 2);
}

TEST_CASE("seeded outputs are byte-identical where no timing is involved") {
    const fs::path dir = scratch("determinism");
    const fs::path p1 = dir / "a.json";
    const fs::path p2 = dir / "b.json";
    REQUIRE(run(cli() + " generate supply_demand T=2 n_T=1 --seed 5 --out '" + p1.string() +
                "' > /dev/null") == 0);
    REQUIRE(run(cli() + " generate supply_demand T=2 n_T=1 --seed 5 --out '" + p2.string() +
                "' > /dev/null") == 0);
    CHECK(slurp(p1) == slurp(p2));
    CHECK(slurp(dir / "a.truth.json") == slurp(dir / "b.truth.json"));

    // Same truth seed with a fresh noise seed keeps x_true unchanged.
    const fs::path p3 = dir / "c.json";
    REQUIRE(run(cli() + " generate supply_demand T=2 n_T=1 --seed 5 --noise-seed 99 --out '" +
                p3.string() + "' > /dev/null") == 0);
    const json t1 = slurp_json(dir / "a.truth.json");
    const json t3 = slurp_json(dir / "c.truth.json");
    CHECK(t1.at("x_true") == t3.at("x_true"));
    CHECK(slurp(p1) != slurp(p3));

    const fs::path r1 = dir / "r1.json";
    const fs::path r2 = dir / "r2.json";
    REQUIRE(run(cli() + " solve '" + p1.string() + "' --out '" + r1.string() + "'") == 0);
    REQUIRE(run(cli() + " solve '" + p1.string() + "' --out '" + r2.string() + "'") == 0);
    const json d1 = slurp_json(r1);
    const json d2 = slurp_json(r2);
    CHECK(d1.at("x_hat") == d2.at("x_hat"));  // exact field equality
    CHECK(d1.at("final") == d2.at("final"));
    CHECK(d1.at("sweeps") == d2.at("sweeps"));

    const fs::path v1 = dir / "v1.json";
    const fs::path v2 = dir / "v2.json";
    REQUIRE(run(cli() + " variance '" + p1.string() + "' '" + r1.string() +
                "' --block tau --samples 32 --seed 11 --out '" + v1.string() + "'") == 0);
    REQUIRE(run(cli() + " variance '" + p1.string() + "' '" + r1.string() +
                "' --block tau --samples 32 --seed 11 --out '" + v2.string() + "'") == 0);
    CHECK(slurp(dir / "v1.sigma.csv") == slurp(dir / "v2.sigma.csv"));
}

TEST_CASE("default supply-demand solve converges in a handful of sweeps") {
    const fs::path dir = scratch("defaults");
    const fs::path problem = dir / "p.json";
    const fs::path report = dir / "r.json";
    REQUIRE(run(cli() + " generate supply_demand T=2 n_T=1 noise_ratio=0.01 --seed 3 --out '" +
                problem.string() + "' > /dev/null") == 0);
    REQUIRE(run(cli() + " solve '" + problem.string() + "' --out '" + report.string() + "'") == 0);
    const json doc = slurp_json(report);
    CHECK(doc.at("status") == "converged");
    CHECK(doc.at("sweeps").get<int>() <= 30);
}

TEST_CASE("fast method coincides with the sampled one at tiny scale") {
    const fs::path dir = scratch("fast");
    const fs::path problem = dir / "p.json";
    const fs::path report = dir / "r.json";
    REQUIRE(run(cli() + " generate supply_demand T=2 n_T=1 --seed 2 --out '" + problem.string() +
                "' > /dev/null") == 0);
    REQUIRE(run(cli() + " solve '" + problem.string() + "' --out '" + report.string() + "'") == 0);
    REQUIRE(run(cli() + " variance '" + problem.string() + "' '" + report.string() +
                "' --block tau --method prop1 --samples 8 --scale 1e-8 --out '" +
                (dir / "slow.json").string() + "'") == 0);
    REQUIRE(run(cli() + " variance '" + problem.string() + "' '" + report.string() +
                "' --block tau --method fast --samples 8 --scale 1e-8 --out '" +
                (dir / "fast.json").string() + "'") == 0);
    const auto slow = parse_csv_matrix(slurp(dir / "slow.sigma.csv"));
    const auto fast = parse_csv_matrix(slurp(dir / "fast.sigma.csv"));
    REQUIRE(slow.size() == fast.size());
    double max_diff = 0.0, max_ref = 0.0;
    for (std::size_t i = 0; i < slow.size(); ++i) {
        REQUIRE(slow[i].size() == fast[i].size());
        for (std::size_t j = 0; j < slow[i].size(); ++j) {
            max_diff = std::max(max_diff, std::abs(slow[i][j] - fast[i][j]));
            max_ref = std::max(max_ref, std::abs(slow[i][j]));
        }
    }
    CHECK(max_diff <= 1e-6 * (1.0 + max_ref));
}

TEST_CASE("resampling method regenerates the problem from its metadata") {
    const fs::path dir = scratch("resampling");
    const fs::path problem = dir / "p.json";
    const fs::path report = dir / "r.json";
    const fs::path var_report = dir / "v.json";
    REQUIRE(run(cli() + " generate supply_demand T=2 n_T=1 --seed 4 --out '" + problem.string() +
                "' > /dev/null") == 0);
    REQUIRE(run(cli() + " solve '" + problem.string() + "' --out '" + report.string() + "'") == 0);
    REQUIRE(run(cli() + " variance '" + problem.string() + "' '" + report.string() +
                "' --block tau --method resampling --samples 4 --seed 7 --out '" +
                var_report.string() + "'") == 0);
    const json doc = slurp_json(var_report);
    const double norm = doc.at("spectral_norm").get<double>();
    CHECK(std::isfinite(norm));
    CHECK(norm >= 0.0);
    const auto sigma = parse_csv_matrix(slurp(dir / "v.sigma.csv"));
    REQUIRE(sigma.size() == 1);  // tau block has one entry at n_T=1
    REQUIRE(sigma[0].size() == 1);
    CHECK(sigma[0][0] >= 0.0);
}
