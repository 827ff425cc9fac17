#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace {

struct RunResult {
    int exit_code;
    std::string output;
};

RunResult run(const std::string& args) {
    std::string cmd = std::string(CFINSLER_BINARY) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::string out;
    char buf[4096];
    while (std::size_t got = fread(buf, 1, sizeof buf, pipe)) out.append(buf, got);
    int status = pclose(pipe);
    int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return {code, out};
}

std::string metric_path(const std::string& rel) {
    return std::string(CFINSLER_SOURCE_DIR) + "/" + rel;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::stringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        rows.push_back(std::move(cells));
    }
    return rows;
}

}  // namespace

TEST_CASE("check: ball passes, a non-homogeneous pseudo-metric fails, missing file is usage") {
    RunResult ok = run("check --metric ball_kobayashi --dim 2 --sites 10 "
                       "--homogeneity-samples 20 --quiet");
    CHECK(ok.exit_code == 0);
    CHECK(ok.output.find("FAIL") == std::string::npos);

    std::filesystem::create_directories("cli_tmp");
    {
        std::ofstream bad("cli_tmp/bogus.metric");
        bad << "dim = 1\nG = v1 + z1\n";
    }
    RunResult fail = run("check --metric cli_tmp/bogus.metric --sites 5 "
                         "--homogeneity-samples 10 --quiet");
    CHECK(fail.exit_code == 1);
    CHECK(fail.output.find("homogeneity") != std::string::npos);
    CHECK(fail.output.find("FAIL") != std::string::npos);

    RunResult missing = run("check --metric does/not/exist.metric");
    CHECK(missing.exit_code == 64);
}

TEST_CASE("curvature: poincare rows are all -4") {
    RunResult r = run("curvature --metric poincare_disk --samples 100 --quiet");
    CHECK(r.exit_code == 0);
    auto rows = parse_csv(r.output);
    REQUIRE(rows.size() >= 101);
    int data_rows = 0;
    for (const auto& row : rows) {
        if (row[0] == "index" || row[0] == "summary") continue;
        double k = std::stod(row.back());
        CHECK(std::abs(k + 4.0) < 1e-9);
        ++data_rows;
    }
    CHECK(data_rows == 100);
}

TEST_CASE("curvature: euclidean zeros, quartic constant-zero column") {
    RunResult r = run("curvature --metric euclidean --dim 2 --samples 20 --quiet");
    CHECK(r.exit_code == 0);
    for (const auto& row : parse_csv(r.output)) {
        if (row[0] == "index" || row[0] == "summary") continue;
        CHECK(std::abs(std::stod(row.back())) < 1e-12);
    }
    // the quartic perturbation has no base-point dependence, so its
    // holomorphic curvature is identically zero and the spread vanishes
    RunResult q = run("curvature --metric quartic_perturbation --dim 2 --samples 20 --quiet");
    CHECK(q.exit_code == 0);
    for (const auto& row : parse_csv(q.output)) {
        if (row[0] == "summary") {
            double spread = std::stod(row.back());
            CHECK(std::abs(spread) < 1e-12);
        }
    }
}

TEST_CASE("classify: verdicts and exit codes") {
    RunResult ball = run("classify --metric ball_kobayashi --dim 2 --samples 50 --quiet "
                         "--format json");
    CHECK(ball.exit_code == 0);
    CHECK(ball.output.find("\"theorem_coherent\": true") != std::string::npos);
    CHECK(ball.output.find("POSITIVE: F is identified with the Kobayashi metric") !=
          std::string::npos);

    RunResult euc = run("classify --metric euclidean --dim 2 --samples 30 --quiet --format json");
    CHECK(euc.exit_code == 0);  // classified, with negative verdicts
    CHECK(euc.output.find("NEGATIVE") != std::string::npos);

    std::filesystem::create_directories("cli_tmp");
    {
        std::ofstream bad("cli_tmp/degenerate.metric");
        bad << "dim = 2\nG = abs2(v1)\n";
    }
    RunResult deg = run("classify --metric cli_tmp/degenerate.metric --samples 30 --quiet");
    CHECK(deg.exit_code == 2);
}

TEST_CASE("geodesic: trace, refusal, usage") {
    std::filesystem::create_directories("cli_tmp");
    RunResult ball = run("geodesic --metric ball_kobayashi --dim 2 --point 0,0 --xi 1,0 "
                         "--theta-grid 32 --t-grid 24 --smax 2.5 --out cli_tmp/ball_geo --quiet");
    CHECK(ball.exit_code == 0);
    CHECK(std::filesystem::exists("cli_tmp/ball_geo.csv"));
    CHECK(std::filesystem::exists("cli_tmp/ball_geo.json"));
    {
        std::ifstream js("cli_tmp/ball_geo.json");
        std::stringstream buf;
        buf << js.rdbuf();
        CHECK(buf.str().find("\"outcome\": \"trace\"") != std::string::npos);
        CHECK(buf.str().find("\"geodesic_complex_curve\": true") != std::string::npos);
    }

    RunResult euc = run("geodesic --metric euclidean --dim 2 --point 0,0 --xi 1,0 "
                        "--out cli_tmp/euc_geo --quiet");
    CHECK(euc.exit_code == 3);
    {
        std::ifstream js("cli_tmp/euc_geo.json");
        std::stringstream buf;
        buf << js.rdbuf();
        CHECK(buf.str().find("\"outcome\": \"refusal\"") != std::string::npos);
    }

    RunResult zero = run("geodesic --metric ball_kobayashi --dim 2 --point 0,0 --xi 0,0 --quiet");
    CHECK(zero.exit_code == 64);

    RunResult nonunit = run("geodesic --metric ball_kobayashi --dim 2 --point 0,0 --xi 2,0 --quiet");
    CHECK(nonunit.exit_code == 64);
    RunResult normalized = run("geodesic --metric ball_kobayashi --dim 2 --point 0,0 --xi 2,0 "
                               "--normalize --theta-grid 32 --t-grid 24 --smax 2 "
                               "--out cli_tmp/norm_geo --quiet");
    CHECK(normalized.exit_code == 0);
}

TEST_CASE("laplacian and ahlfors") {
    RunResult lap = run("laplacian --u absq --at 0.25-0.1i --format csv");
    CHECK(lap.exit_code == 0);
    auto rows = parse_csv(lap.output);
    REQUIRE(rows.size() >= 2);
    CHECK(std::abs(std::stod(rows[1][2]) - 4.0) < 1e-9);

    RunResult curv = run("laplacian --u ga:1 --at 0 --curvature");
    CHECK(curv.exit_code == 0);
    auto crows = parse_csv(curv.output);
    CHECK(std::abs(std::stod(crows[1][2]) + 4.0) < 1e-3);

    RunResult eq = run("ahlfors --g poincare --a 1 --quiet");
    CHECK(eq.exit_code == 0);
    CHECK(eq.output.find("heins_equality,true") != std::string::npos);

    RunResult below = run("ahlfors --g mul:0.5:poincare --a 1 --quiet");
    CHECK(below.exit_code == 0);
    CHECK(below.output.find("violation,false") != std::string::npos);
    CHECK(below.output.find("heins_equality,false") != std::string::npos);

    RunResult above = run("ahlfors --g mul:2:poincare --a 1 --quiet");
    CHECK(above.exit_code == 1);
    CHECK(above.output.find("violation,true") != std::string::npos);

    RunResult pull = run("ahlfors --g pullback:ball_kobayashi --a 1 --quiet");
    CHECK(pull.exit_code == 0);
    CHECK(pull.output.find("heins_equality,true") != std::string::npos);
    CHECK(pull.output.find("equality_everywhere,true") != std::string::npos);
}

TEST_CASE("outputs are byte-identical across reruns and thread counts") {
    std::string args = "classify --metric ball_kobayashi --dim 2 --samples 40 --seed 7 "
                       "--format json --quiet";
    RunResult a = run(args + " --threads 1");
    RunResult b = run(args + " --threads 1");
    RunResult c = run(args + " --threads 4");
    CHECK(a.exit_code == 0);
    CHECK(a.output == b.output);
    CHECK(a.output == c.output);

    std::string curv = "curvature --metric ball_kobayashi --dim 2 --samples 30 --seed 9 --quiet";
    RunResult d = run(curv + " --threads 1");
    RunResult e = run(curv + " --threads 4");
    CHECK(d.output == e.output);
}

TEST_CASE("format json is accepted everywhere and quiet suppresses chatter") {
    RunResult j = run("check --metric euclidean --dim 2 --sites 4 --homogeneity-samples 5 "
                      "--format json --quiet");
    CHECK(j.exit_code == 0);
    CHECK(j.output.find("\"rows\"") != std::string::npos);

    RunResult lapj = run("laplacian --u re --at 0.1+0.1i --format json");
    CHECK(lapj.exit_code == 0);
    CHECK(lapj.output.find("\"laplacian\"") != std::string::npos);

    RunResult usage = run("frobnicate");
    CHECK(usage.exit_code == 64);
}

TEST_CASE("config file provides defaults, flags override") {
    std::filesystem::create_directories("cli_tmp");
    {
        std::ofstream cfg("cli_tmp/run.cfg");
        cfg << "metric = poincare_disk\nsamples = 7\nquiet = true\n";
    }
    RunResult r = run("curvature --config cli_tmp/run.cfg");
    CHECK(r.exit_code == 0);
    int data_rows = 0;
    for (const auto& row : parse_csv(r.output))
        if (row[0] != "index" && row[0] != "summary") ++data_rows;
    CHECK(data_rows == 7);

    RunResult overridden = run("curvature --config cli_tmp/run.cfg --samples 3");
    int rows2 = 0;
    for (const auto& row : parse_csv(overridden.output))
        if (row[0] != "index" && row[0] != "summary") ++rows2;
    CHECK(rows2 == 3);
}

TEST_CASE("metric files load through the CLI") {
    RunResult r = run("check --metric " + metric_path("metrics/hermitian_nonkahler.metric") +
                      " --sites 6 --homogeneity-samples 10 --quiet");
    CHECK(r.exit_code == 0);

    RunResult p = run("curvature --metric " + metric_path("metrics/poincare.metric") +
                      " --samples 10 --quiet");
    CHECK(p.exit_code == 0);
    for (const auto& row : parse_csv(p.output)) {
        if (row[0] == "index" || row[0] == "summary") continue;
        CHECK(std::abs(std::stod(row.back()) + 4.0) < 1e-9);
    }
}
