// Exercises the installed CLI contract: subcommands, exit codes, file outputs.
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>

#include "divinv/fields.hpp"

using namespace divinv;
namespace fs = std::filesystem;

namespace {

std::string cli_path() {
    const char* p = std::getenv("DIVINV_CLI");
    REQUIRE_MESSAGE(p != nullptr, "DIVINV_CLI must point at the built binary");
    return p;
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("divinv_cli_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

int run(const std::string& cmd) {
    int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_valid_config(const fs::path& p) {
    PerforationConfig cfg;
    cfg.epsilon = 0.25;
    cfg.alpha = 2.0;
    cfg.delta0 = 1.0;
    cfg.delta1 = 0.3;
    cfg.delta2 = 0.6;
    cfg.base = BaseDomain::box({0.5, 0.5, 0.5}, {0.5, 0.5, 0.5});
    HoleSpec h;
    h.center = {0.5, 0.5, 0.5};
    h.shape.kind = HoleShape::Kind::Ellipsoid;
    h.shape.semi_axes = {0.8, 0.8, 0.8};
    cfg.holes.push_back(h);
    std::ofstream(p) << config_to_json(cfg);
}

} // namespace

TEST_CASE("validate: exit codes 0, 2, 1") {
    TempDir tmp;
    fs::path cfg = tmp.path / "cfg.json";
    write_valid_config(cfg);
    fs::path log = tmp.path / "out.txt";
    CHECK(run(cli_path() + " validate --config " + cfg.string() + " > " + log.string()) == 0);
    CHECK(slurp(log).find("N=1") != std::string::npos);

    // overlapping holes: exit 2 naming the violation
    PerforationConfig bad = config_from_file(cfg.string());
    bad.holes.push_back(bad.holes[0]);
    bad.holes[1].center.x += 0.05;
    std::ofstream(tmp.path / "bad.json") << config_to_json(bad);
    fs::path err = tmp.path / "err.txt";
    CHECK(run(cli_path() + " validate --config " + (tmp.path / "bad.json").string() + " 2> " +
              err.string()) == 2);
    CHECK(slurp(err).find("ControlVolumesOverlap") != std::string::npos);

    CHECK(run(cli_path() + " validate --config " + (tmp.path / "missing.json").string() +
              " 2>/dev/null") == 1);
}

TEST_CASE("solve: builtin rhs writes fields and diagnostics") {
    TempDir tmp;
    fs::path cfg = tmp.path / "cfg.json";
    write_valid_config(cfg);
    fs::path out = tmp.path / "run";
    int rc = run(cli_path() + " solve --config " + cfg.string() +
                 " --nx 33 --tol 1e-6 --out " + out.string() + " > /dev/null");
    CHECK(rc == 0);
    CHECK(fs::exists(out / "solution.field"));
    CHECK(fs::exists(out / "norms.csv"));
    std::string diag = slurp(out / "diagnostics.json");
    CHECK(diag.find("\"residual\"") != std::string::npos);
    CHECK(diag.find("\"hole_trace_max\"") != std::string::npos);
    CHECK(diag.find("\"per_hole\"") != std::string::npos);
    std::string solves = slurp(out / "solves.csv");
    CHECK(solves.rfind("region,backend,q,residual,iterations,grad_norm\n", 0) == 0);
}

TEST_CASE("solve: rhs file with nonzero mean exits 2") {
    TempDir tmp;
    fs::path cfg = tmp.path / "cfg.json";
    write_valid_config(cfg);
    // constant-1 rhs on the solve grid
    Grid g({0, 0, 0}, 33, 33, 33, 1.0 / 33, 1.0 / 33, 1.0 / 33);
    auto mask = std::make_shared<CellMask>(full_fluid_mask(g));
    ScalarField f(mask);
    for (auto& v : f.values) v = 1.0;
    fs::path rhs = tmp.path / "rhs.field";
    write_field(rhs.string(), f);
    int rc = run(cli_path() + " solve --config " + cfg.string() + " --nx 33 --rhs file:" +
                 rhs.string() + " --out " + (tmp.path / "r").string() + " 2>/dev/null");
    CHECK(rc == 2);
}

TEST_CASE("ledger: JSON values and scan CSV") {
    TempDir tmp;
    fs::path out = tmp.path / "ledger.json";
    CHECK(run(cli_path() + " ledger --gamma 3 --alpha 4 --out " + out.string()) == 0);
    std::string text = slurp(out);
    CHECK(text.find("\"sigma1\"") != std::string::npos);
    CHECK(text.find("0.5") != std::string::npos);

    fs::path scan = tmp.path / "scan.csv";
    CHECK(run(cli_path() + " ledger --scan --out " + scan.string()) == 0);
    CHECK(slurp(scan).rfind("gamma,alpha,admissible,sigma1\n", 0) == 0);
}

TEST_CASE("sweep + report: row counts, fit JSON, determinism") {
    TempDir tmp;
    std::ofstream(tmp.path / "plan.json") << R"({
      "epsilons": [0.25, 0.2],
      "q_list": [2.0],
      "alpha": 2.0,
      "delta0": 1.0, "delta1": 0.3, "delta2": 0.6,
      "base": {"kind": "box", "center": [0.5, 0.5, 0.5], "half_extents": [0.5, 0.5, 0.5]},
      "shape": {"kind": "ellipsoid", "semi_axes": [0.8, 0.8, 0.8]},
      "layout": "single",
      "tol": 1e-6
    })";
    fs::path out1 = tmp.path / "a", out2 = tmp.path / "b";
    CHECK(run(cli_path() + " sweep --plan " + (tmp.path / "plan.json").string() +
              " --no-timing --out " + out1.string() + " > /dev/null") == 0);
    CHECK(run(cli_path() + " sweep --plan " + (tmp.path / "plan.json").string() +
              " --no-timing --out " + out2.string() + " > /dev/null") == 0);
    std::string csv1 = slurp(out1 / "sweep.csv");
    CHECK(csv1 == slurp(out2 / "sweep.csv")); // byte-identical
    // header + 2 data rows
    CHECK(std::count(csv1.begin(), csv1.end(), '\n') == 3);
    CHECK(csv1.rfind("epsilon,q,alpha,nx,ratio,residual,seconds\n", 0) == 0);

    // synthetic exact-power CSV reports slope -0.8
    std::ofstream(tmp.path / "synth.csv") << "epsilon,q,alpha,nx,ratio,residual,seconds\n"
                                          << "0.3,2.5,2,33," << std::pow(0.3, -0.8) << ",0,0\n"
                                          << "0.2,2.5,2,33," << std::pow(0.2, -0.8) << ",0,0\n"
                                          << "0.1,2.5,2,33," << std::pow(0.1, -0.8) << ",0,0\n";
    fs::path rep = tmp.path / "rep";
    CHECK(run(cli_path() + " report --csv " + (tmp.path / "synth.csv").string() + " --out " +
              rep.string() + " > /dev/null") == 0);
    std::string fit = slurp(rep / "fit.json");
    CHECK(fit.find("\"slope\"") != std::string::npos);
    CHECK(fit.find("-0.8") != std::string::npos);
    CHECK(fs::exists(rep / "ratios.dat"));
    CHECK(fs::exists(rep / "fit.txt"));
}
