// divinv: inverse-of-divergence solves on perforated domains, scaling sweeps,
// and the exponent ledger.
//
// Exit codes: 0 success, 1 I/O, 2 validation, 3 convergence, 4 resolution.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "divinv/harness.hpp"
#include "divinv/ledger.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace divinv;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Io, "cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::Io, "cannot write " + path);
    out << text;
}

BaseDomain base_from_json(const json& b) {
    std::string kind = b.at("kind").get<std::string>();
    Vec3 c{b.at("center")[0], b.at("center")[1], b.at("center")[2]};
    if (kind == "ball")
        return BaseDomain::ball(c, b.at("radius").get<double>(), b.value("star_radius", 0.0));
    if (kind == "box") {
        Vec3 h{b.at("half_extents")[0], b.at("half_extents")[1], b.at("half_extents")[2]};
        return BaseDomain::box(c, h, b.value("star_radius", 0.0));
    }
    fail(ErrorKind::Io, "base.kind must be 'ball' or 'box'");
}

HoleShape shape_from_json(const json& s) {
    HoleShape shape;
    std::string kind = s.value("kind", "ball");
    if (kind == "ellipsoid") {
        shape.kind = HoleShape::Kind::Ellipsoid;
        shape.semi_axes = {s.at("semi_axes")[0], s.at("semi_axes")[1], s.at("semi_axes")[2]};
    }
    return shape;
}

SweepPlan plan_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const std::exception& e) {
        fail(ErrorKind::Io, std::string("plan parse error: ") + e.what());
    }
    SweepPlan plan;
    try {
        for (double e : j.at("epsilons")) plan.epsilons.push_back(e);
        for (double q : j.at("q_list")) plan.q_list.push_back(q);
        plan.alpha = j.at("alpha").get<double>();
        plan.delta0 = j.at("delta0").get<double>();
        plan.delta1 = j.at("delta1").get<double>();
        plan.delta2 = j.at("delta2").get<double>();
        plan.base = base_from_json(j.at("base"));
        if (j.contains("shape")) plan.shape = shape_from_json(j["shape"]);
        std::string layout = j.value("layout", "single");
        if (layout == "single") plan.layout = HoleLayout::SingleCentered;
        else if (layout == "lattice") plan.layout = HoleLayout::Lattice;
        else if (layout == "random") plan.layout = HoleLayout::Random;
        else fail(ErrorKind::Io, "layout must be single|lattice|random");
        plan.lattice_m = j.value("lattice_m", 2);
        plan.seed = j.value("seed", 0ull);
        plan.random_count = j.value("random_count", 4);
        std::string rhs = j.value("rhs", "bump_dx");
        if (rhs == "bump_dx") plan.rhs = RhsFamily::BumpDx;
        else if (rhs == "hole_adjacent") plan.rhs = RhsFamily::HoleAdjacent;
        else fail(ErrorKind::Io, "rhs must be bump_dx|hole_adjacent");
        plan.cells_per_hole = j.value("cells_per_hole", 3);
        plan.resolution_cap = j.value("resolution_cap", 96);
        plan.resolution_min = j.value("resolution_min", 17);
        plan.tol = j.value("tol", 1e-6);
        std::string backend = j.value("backend", "minenergy");
        plan.backend = backend == "integral" ? Backend::Integral : Backend::MinEnergy;
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        fail(ErrorKind::Io, std::string("plan schema error: ") + e.what());
    }
    return plan;
}

int cmd_validate(const std::string& config_path) {
    PerforationConfig cfg = config_from_file(config_path);
    PerforatedDomain dom = validate_config(cfg);
    std::cout << "valid: N=" << dom.hole_count() << " bound=" << dom.hole_count_bound();
    if (dom.hole_count() > 1) std::cout << " min_gap=" << format_double(dom.min_center_gap());
    std::cout << " eps=" << format_double(cfg.epsilon) << " alpha=" << format_double(cfg.alpha)
              << "\n";
    return 0;
}

int cmd_solve(const std::string& config_path, const std::string& rhs_spec, int nx,
              const std::string& backend_name, double tol, const std::string& out_dir,
              double q_report, int threads) {
    PerforationConfig cfg = config_from_file(config_path);
    PerforatedDomain dom = validate_config(cfg);
    Grid grid = Grid::cover(cfg.base, nx);
    auto mask = std::make_shared<CellMask>(build_cell_mask(dom, grid));
    CutoffSet cutoffs(dom);

    ScalarField f;
    if (rhs_spec == "builtin:bump_dx") {
        SweepPlan tmp;
        tmp.base = cfg.base;
        f = plan_rhs(tmp, dom, mask, q_report);
    } else if (rhs_spec.rfind("file:", 0) == 0) {
        ScalarField raw = read_scalar_field(rhs_spec.substr(5));
        if (raw.grid.nx != grid.nx || raw.grid.ny != grid.ny || raw.grid.nz != grid.nz)
            fail(ErrorKind::Io, "rhs field dimensions do not match the solve grid");
        f = ScalarField(mask);
        f.values = raw.values;
        for (std::size_t c = 0; c < f.values.size(); ++c)
            if (!mask->is_fluid(c)) f.values[c] = 0.0;
        // the mean gate stays with the solver; no silent projection of files
    } else {
        fail(ErrorKind::Io, "rhs must be builtin:bump_dx or file:<path>");
    }

    Backend backend = backend_name == "integral" ? Backend::Integral : Backend::MinEnergy;
    SolverParams sp;
    sp.threads = threads;
    PerforatedSolution sol = bogovskii_perforated(f, dom, cutoffs, backend, tol, {q_report}, sp);

    fs::create_directories(out_dir);
    write_field((fs::path(out_dir) / "solution.field").string(), sol.u);

    json diag;
    diag["residual"] = sol.residual;
    diag["hole_trace_max"] = sol.hole_trace_max;
    json per_hole = json::array();
    for (const auto& h : sol.per_hole)
        per_hole.push_back({{"hole", h.hole},
                            {"empty", h.empty},
                            {"compat_E", h.compat_E},
                            {"compat_F", h.compat_F},
                            {"iters_E", h.iters_E},
                            {"iters_F", h.iters_F}});
    diag["per_hole"] = per_hole;
    spit((fs::path(out_dir) / "diagnostics.json").string(), diag.dump(2) + "\n");

    std::vector<NormRow> rows;
    for (const auto& nq : sol.norms) {
        rows.push_back({"u_lq", nq.q, nq.lq});
        rows.push_back({"grad_u_lq", nq.q, nq.w1q});
    }
    spit((fs::path(out_dir) / "norms.csv").string(), norms_to_csv(rows));

    SolveDiag sd{"omega_eps", backend, q_report, sol.residual, sol.iterations,
                 sol.norms[0].w1q};
    spit((fs::path(out_dir) / "solves.csv").string(), diag_csv_header() + diag_csv_row(sd));

    std::cout << "residual=" << format_double(sol.residual)
              << " hole_trace_max=" << format_double(sol.hole_trace_max) << "\n";
    return sol.residual <= tol && sol.hole_trace_max == 0.0 ? 0 : 3;
}

int cmd_sweep(const std::string& plan_path, const std::string& out_dir, int threads,
              bool no_timing) {
    SweepPlan plan = plan_from_json(slurp(plan_path));
    std::vector<SweepRecord> records = run_sweep(plan, threads, !no_timing);
    fs::create_directories(out_dir);
    spit((fs::path(out_dir) / "sweep.csv").string(), sweep_csv(records));
    std::cout << "wrote " << records.size() << " records to " << out_dir << "/sweep.csv\n";
    return 0;
}

int cmd_ledger(double gamma, double alpha, double delta0_exp, bool scan,
               const std::string& out_path) {
    if (scan) {
        std::string csv = ledger::scan_csv(2.05, 3.0, 40, 1.0, 10.0, 40);
        if (out_path.empty())
            std::cout << csv;
        else
            spit(out_path, csv);
        return 0;
    }
    ledger::HomogParams p{gamma, alpha, delta0_exp};
    json arr = json::array();
    for (const auto& row : ledger::evaluate(p))
        arr.push_back({{"name", row.name},
                       {"value", row.value},
                       {"identity_residual", row.identity_residual},
                       {"admissible", row.admissible}});
    std::string text = arr.dump(2) + "\n";
    if (out_path.empty())
        std::cout << text;
    else
        spit(out_path, text);
    return 0;
}

int cmd_report(const std::string& csv_path, const std::string& out_dir) {
    std::vector<SweepRecord> records = sweep_from_csv(slurp(csv_path));
    if (records.empty()) fail(ErrorKind::TooFewPoints, "no records in " + csv_path);

    // group by (q, alpha)
    struct Key {
        double q, alpha;
        bool operator<(const Key& o) const {
            return q != o.q ? q < o.q : alpha < o.alpha;
        }
    };
    std::map<Key, std::vector<SweepRecord>> groups;
    for (const auto& r : records) groups[{r.q, r.alpha}].push_back(r);

    fs::create_directories(out_dir);
    json report = json::array();
    std::string table = "q      alpha  predicted  slope      r2\n";
    std::string gnuplot;
    for (auto& [key, recs] : groups) {
        double predicted = predicted_exponent(key.q, key.alpha, /*strict=*/false);
        FitResult fit = fit_exponent(recs);
        BoundCheck bc = bound_check(recs, predicted);
        json entry;
        entry["q"] = key.q;
        entry["alpha"] = key.alpha;
        entry["predicted"] = predicted;
        entry["slope"] = fit.slope;
        entry["r_squared"] = fit.r_squared;
        entry["bound_check"] = bc.pass;
        report.push_back(entry);
        char buf[160];
        std::snprintf(buf, sizeof buf, "%-6.3g %-6.3g %-10.4g %-10.4g %-10.6g\n", key.q,
                      key.alpha, predicted, fit.slope, fit.r_squared);
        table += buf;
        gnuplot += "# q=" + format_double(key.q) + " alpha=" + format_double(key.alpha) + "\n";
        for (const auto& r : recs)
            gnuplot += format_double(r.epsilon) + " " + format_double(r.ratio) + "\n";
        gnuplot += "\n";
    }
    spit((fs::path(out_dir) / "fit.json").string(), report.dump(2) + "\n");
    spit((fs::path(out_dir) / "fit.txt").string(), table);
    spit((fs::path(out_dir) / "ratios.dat").string(), gnuplot);
    std::cout << table;
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"inverse-of-divergence operators on perforated domains"};
    app.require_subcommand(1);

    std::string config_path, plan_path, out_dir = "out", rhs_spec = "builtin:bump_dx";
    std::string backend = "minenergy", csv_path, out_path;
    double tol = 1e-6, q_report = 2.0;
    double gamma = 3.0, alpha = 4.0, delta0_exp = 0.0;
    int threads = 1, nx = 33;
    bool scan = false, no_timing = false;

    auto* validate = app.add_subcommand("validate", "check a perforation config");
    validate->add_option("--config", config_path)->required();

    auto* solve = app.add_subcommand("solve", "solve div u = f on a perforated domain");
    solve->add_option("--config", config_path)->required();
    solve->add_option("--rhs", rhs_spec, "builtin:bump_dx or file:<path>");
    solve->add_option("--nx", nx, "cells along x");
    solve->add_option("--backend", backend)->check(CLI::IsMember({"integral", "minenergy"}));
    solve->add_option("--tol", tol);
    solve->add_option("--out", out_dir);
    solve->add_option("--q", q_report);
    solve->add_option("--threads", threads);

    auto* sweep = app.add_subcommand("sweep", "run an epsilon sweep plan");
    sweep->add_option("--plan", plan_path)->required();
    sweep->add_option("--out", out_dir);
    sweep->add_option("--threads", threads);
    sweep->add_flag("--no-timing", no_timing, "write 0 in the seconds column (byte-stable)");

    auto* ledger_cmd = app.add_subcommand("ledger", "evaluate the exponent identities");
    ledger_cmd->add_option("--gamma", gamma);
    ledger_cmd->add_option("--alpha", alpha);
    ledger_cmd->add_option("--delta0-exp", delta0_exp);
    ledger_cmd->add_flag("--scan", scan, "emit a (gamma, alpha) admissibility CSV");
    ledger_cmd->add_option("--out", out_path);

    auto* report = app.add_subcommand("report", "fit exponents from a sweep CSV");
    report->add_option("--csv", csv_path)->required();
    report->add_option("--out", out_dir);

    CLI11_PARSE(app, argc, argv);

    try {
        if (validate->parsed()) return cmd_validate(config_path);
        if (solve->parsed())
            return cmd_solve(config_path, rhs_spec, nx, backend, tol, out_dir, q_report, threads);
        if (sweep->parsed()) return cmd_sweep(plan_path, out_dir, threads, no_timing);
        if (ledger_cmd->parsed()) return cmd_ledger(gamma, alpha, delta0_exp, scan, out_path);
        if (report->parsed()) return cmd_report(csv_path, out_dir);
    } catch (const Error& e) {
        std::cerr << "error [" << error_kind_name(e.kind()) << "]: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
