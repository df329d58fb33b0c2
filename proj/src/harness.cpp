#include "divinv/harness.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <sstream>

#include "divinv/errors.hpp"

namespace divinv {

double predicted_exponent(double q, double alpha, bool strict) {
    if (strict && !(q > 1.0 && q < 3.0))
        fail(ErrorKind::ExponentRange,
             "the scaling law is stated for q in (1,3); pass strict=false to explore");
    return ((3.0 - q) * alpha - 3.0) / q;
}

int plan_resolution(const SweepPlan& plan, double epsilon) {
    Vec3 lo, hi;
    plan.base.bounding_box(lo, hi);
    double L = hi.x - lo.x;
    double hole_diam = 2.0 * plan.shape.circumradius() * std::pow(epsilon, plan.alpha);
    double annulus = (plan.delta2 - plan.delta1) * epsilon;
    double h_req = std::min(hole_diam / plan.cells_per_hole, annulus / 3.0);
    int nx = std::max(plan.resolution_min, static_cast<int>(std::ceil(L / h_req)));
    if (nx % 2 == 0) ++nx; // odd: a centered hole sits on a cell center
    if (nx > plan.resolution_cap)
        fail(ErrorKind::UnderResolved,
             "epsilon " + std::to_string(epsilon) + " needs nx = " + std::to_string(nx) +
                 " > cap " + std::to_string(plan.resolution_cap) + "; plan rejected");
    return nx;
}

PerforationConfig plan_config(const SweepPlan& plan, double epsilon) {
    PerforationConfig cfg;
    cfg.epsilon = epsilon;
    cfg.alpha = plan.alpha;
    cfg.delta0 = plan.delta0;
    cfg.delta1 = plan.delta1;
    cfg.delta2 = plan.delta2;
    cfg.base = plan.base;
    switch (plan.layout) {
    case HoleLayout::SingleCentered:
        cfg.holes.push_back({plan.base.center, plan.shape});
        break;
    case HoleLayout::Lattice: {
        Vec3 lo, hi;
        plan.base.bounding_box(lo, hi);
        int m = plan.lattice_m;
        for (int k = 0; k < m; ++k)
            for (int j = 0; j < m; ++j)
                for (int i = 0; i < m; ++i) {
                    Vec3 p{lo.x + (hi.x - lo.x) * (i + 0.5) / m,
                           lo.y + (hi.y - lo.y) * (j + 0.5) / m,
                           lo.z + (hi.z - lo.z) * (k + 0.5) / m};
                    cfg.holes.push_back({p, plan.shape});
                }
        break;
    }
    case HoleLayout::Random: {
        RandomConfigParams rp;
        rp.epsilon = epsilon;
        rp.alpha = plan.alpha;
        rp.delta0 = plan.delta0;
        rp.delta1 = plan.delta1;
        rp.delta2 = plan.delta2;
        rp.base = plan.base;
        rp.shape = plan.shape;
        rp.seed = plan.seed;
        rp.max_holes = plan.random_count;
        cfg = generate_random_config(rp);
        break;
    }
    }
    return cfg;
}

namespace {

// d/dx1 of radial_bump(|x - c| / rho)
double bump_dx(const Vec3& p, const Vec3& c, double rho) {
    Vec3 d = p - c;
    double r = d.norm();
    if (r >= rho || r == 0.0) return 0.0;
    return radial_bump_ds(r / rho) / rho * (d.x / r);
}

} // namespace

ScalarField plan_rhs(const SweepPlan& plan, const PerforatedDomain& dom,
                     std::shared_ptr<const CellMask> mask, double q) {
    Vec3 lo, hi;
    plan.base.bounding_box(lo, hi);
    double L = hi.x - lo.x;

    Vec3 center;
    double rho;
    if (plan.rhs == RhsFamily::BumpDx) {
        // fixed offset from the domain center, clear of the control balls
        center = plan.base.center + Vec3{0.30, 0.15, 0.10} * L;
        rho = 0.10 * L;
    } else {
        // stress the correctors: a bump hugging the first hole
        const auto& reg = dom.regions(0);
        double standoff = 2.0 * reg.r_cover + 0.25 * (reg.r_control - reg.r_cover);
        center = reg.center + Vec3{standoff, 0.0, 0.0};
        rho = 0.5 * reg.r_inner;
    }

    ScalarField f(mask);
    const Grid& g = f.grid;
    for (int k = 0; k < g.nz; ++k)
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                std::size_t c = g.cell_index(i, j, k);
                if (!mask->is_fluid(c)) continue;
                f.values[c] = bump_dx(g.cell_center(i, j, k), center, rho);
            }
    zero_mean_project(f);
    double n = lq_norm(f, q);
    if (n == 0.0) fail(ErrorKind::EmptyRegion, "rhs family vanished on this grid");
    for (auto& v : f.values) v /= n;
    return f;
}

std::vector<SweepRecord> run_sweep(const SweepPlan& plan, int threads, bool measure_time) {
    // validator precedence: geometry and resolution of every point first
    struct Point {
        double epsilon;
        int nx;
        PerforationConfig cfg;
    };
    std::vector<Point> points;
    for (double eps : plan.epsilons) {
        Point pt;
        pt.epsilon = eps;
        pt.cfg = plan_config(plan, eps);
        validate_config(pt.cfg);
        pt.nx = plan_resolution(plan, eps);
        points.push_back(std::move(pt));
    }
    for (double q : plan.q_list)
        if (!(q > 1.0)) fail(ErrorKind::BadExponent, "q must exceed 1");

    std::vector<SweepRecord> records;
    for (const Point& pt : points) {
        PerforatedDomain dom = validate_config(pt.cfg);
        Grid grid = Grid::cover(plan.base, pt.nx);
        auto mask = std::make_shared<CellMask>(build_cell_mask(dom, grid));
        CutoffSet cutoffs(dom);
        for (double q : plan.q_list) {
            ScalarField f = plan_rhs(plan, dom, mask, q);
            auto t0 = std::chrono::steady_clock::now();
            SolverParams sp;
            sp.threads = threads;
            PerforatedSolution sol =
                bogovskii_perforated(f, dom, cutoffs, plan.backend, plan.tol, {q}, sp);
            auto t1 = std::chrono::steady_clock::now();
            SweepRecord rec;
            rec.epsilon = pt.epsilon;
            rec.q = q;
            rec.alpha = plan.alpha;
            rec.nx = pt.nx;
            rec.ratio = sol.norms[0].w1q; // rhs has unit L^q norm
            rec.residual = sol.residual;
            rec.seconds =
                measure_time ? std::chrono::duration<double>(t1 - t0).count() : 0.0;
            records.push_back(rec);
        }
    }
    std::sort(records.begin(), records.end(), [](const SweepRecord& a, const SweepRecord& b) {
        if (a.epsilon != b.epsilon) return a.epsilon > b.epsilon;
        return a.q < b.q;
    });
    return records;
}

std::string sweep_csv(const std::vector<SweepRecord>& records) {
    std::string out = "epsilon,q,alpha,nx,ratio,residual,seconds\n";
    for (const auto& r : records) {
        out += format_double(r.epsilon) + "," + format_double(r.q) + "," +
               format_double(r.alpha) + "," + std::to_string(r.nx) + "," +
               format_double(r.ratio) + "," + format_double(r.residual) + "," +
               format_double(r.seconds) + "\n";
    }
    return out;
}

std::vector<SweepRecord> sweep_from_csv(const std::string& text) {
    std::vector<SweepRecord> out;
    std::istringstream ss(text);
    std::string line;
    if (!std::getline(ss, line)) fail(ErrorKind::Io, "empty sweep CSV");
    while (std::getline(ss, line)) {
        if (line.empty()) continue;
        SweepRecord r;
        char comma;
        std::istringstream ls(line);
        ls >> r.epsilon >> comma >> r.q >> comma >> r.alpha >> comma >> r.nx >> comma >>
            r.ratio >> comma >> r.residual >> comma >> r.seconds;
        if (ls.fail()) fail(ErrorKind::Io, "bad sweep CSV row: " + line);
        out.push_back(r);
    }
    return out;
}

FitResult fit_exponent(const std::vector<SweepRecord>& records) {
    if (records.size() < 3)
        fail(ErrorKind::TooFewPoints, "exponent fit needs at least 3 records");
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    double n = static_cast<double>(records.size());
    for (const auto& r : records) {
        double x = std::log(r.epsilon), y = std::log(r.ratio);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        syy += y * y;
    }
    double denom = n * sxx - sx * sx;
    FitResult fit;
    fit.slope = (n * sxy - sx * sy) / denom;
    fit.intercept = (sy - fit.slope * sx) / n;
    double ss_tot = syy - sy * sy / n;
    double ss_res = 0;
    for (const auto& r : records) {
        double e = std::log(r.ratio) - (fit.intercept + fit.slope * std::log(r.epsilon));
        ss_res += e * e;
    }
    fit.r_squared = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
    return fit;
}

BoundCheck bound_check(const std::vector<SweepRecord>& records, double e, double margin) {
    if (records.size() < 2) fail(ErrorKind::TooFewPoints, "bound check needs >= 2 records");
    BoundCheck out;
    out.uniform_rule = e >= 0.0;
    double eps_max = 0, ratio_at_max = 0;
    double rmin = records[0].ratio, rmax = records[0].ratio;
    for (const auto& r : records) {
        if (r.epsilon > eps_max) {
            eps_max = r.epsilon;
            ratio_at_max = r.ratio;
        }
        rmin = std::min(rmin, r.ratio);
        rmax = std::max(rmax, r.ratio);
    }
    out.max_over_min = rmax / rmin;
    out.constant = ratio_at_max / (1.0 + std::pow(eps_max, e));
    out.all_pass = true;
    for (const auto& r : records) {
        bool ok = out.uniform_rule ? out.max_over_min < 2.0
                                   : r.ratio <= margin * out.constant * (1.0 + std::pow(r.epsilon, e));
        out.pass.push_back(ok);
        out.all_pass = out.all_pass && ok;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Poincare constant: inverse power iteration for the smallest nonzero Neumann
// eigenvalue, with CG solves restricted to the mean-zero subspace.

namespace {

struct NeumannOperator {
    // adjacency in compact indexing
    std::vector<std::vector<std::pair<int, double>>> nbr; // (id, 1/h^2)
    std::vector<double> diag;

    std::size_t size() const { return diag.size(); }
    void apply(const std::vector<double>& x, std::vector<double>& y) const {
        for (std::size_t c = 0; c < x.size(); ++c) {
            double s = diag[c] * x[c];
            for (auto [id, w] : nbr[c]) s -= w * x[id];
            y[c] = s;
        }
    }
};

void project_mean(std::vector<double>& v) {
    double m = 0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    for (double& x : v) x -= m;
}

double vdot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// CG for L x = b on the mean-zero subspace (L is singular with constant kernel)
void neumann_cg(const NeumannOperator& L, const std::vector<double>& b, std::vector<double>& x,
                double rel_tol, int max_iter) {
    std::size_t n = L.size();
    x.assign(n, 0.0);
    std::vector<double> r = b, p, Ap(n);
    project_mean(r);
    p = r;
    double rr = vdot(r, r);
    double b_norm = std::sqrt(rr);
    if (b_norm == 0) return;
    for (int it = 0; it < max_iter; ++it) {
        L.apply(p, Ap);
        project_mean(Ap);
        double pAp = vdot(p, Ap);
        if (!(pAp > 0)) break;
        double alpha = rr / pAp;
        for (std::size_t i = 0; i < n; ++i) x[i] += alpha * p[i];
        for (std::size_t i = 0; i < n; ++i) r[i] -= alpha * Ap[i];
        double rr_new = vdot(r, r);
        if (std::sqrt(rr_new) <= rel_tol * b_norm) break;
        double beta = rr_new / rr;
        rr = rr_new;
        for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
    }
    project_mean(x);
}

double smallest_nonzero_eigenvalue(const NeumannOperator& L) {
    std::size_t n = L.size();
    if (n < 2) fail(ErrorKind::UnderResolved, "eigenproblem needs >= 2 cells");
    // deterministic pseudo-random start
    std::vector<double> x(n), y(n), Lx(n);
    std::uint64_t s = 0x9e3779b97f4a7c15ull;
    for (std::size_t i = 0; i < n; ++i) {
        s ^= s << 13;
        s ^= s >> 7;
        s ^= s << 17;
        x[i] = static_cast<double>(s >> 11) * 0x1.0p-53 - 0.5;
    }
    project_mean(x);
    double lambda = 0, lambda_prev = -1;
    for (int it = 0; it < 60; ++it) {
        neumann_cg(L, x, y, 1e-10, 20000);
        double nrm = std::sqrt(vdot(y, y));
        if (nrm == 0) fail(ErrorKind::NonConvergence, "inverse power iteration collapsed");
        for (std::size_t i = 0; i < n; ++i) x[i] = y[i] / nrm;
        L.apply(x, Lx);
        lambda = vdot(x, Lx) / vdot(x, x);
        if (lambda_prev > 0 && std::abs(lambda - lambda_prev) <= 1e-8 * lambda) return lambda;
        lambda_prev = lambda;
    }
    return lambda; // Rayleigh quotient after the iteration budget
}

} // namespace

double poincare_constant(const PerforatedDomain& dom, int n, int resolution) {
    const auto& reg = dom.regions(n);
    double R = reg.r_control;
    double h = 2.0 * R / resolution;
    if ((reg.r_control - reg.r_inner) < 3.0 * h)
        fail(ErrorKind::UnderResolved, "annulus needs >= 3 cells radially");

    // local cubic lattice over the control ball
    int m = resolution;
    std::vector<int> id(static_cast<std::size_t>(m) * m * m, -1);
    std::vector<std::array<int, 3>> cells;
    auto center_of = [&](int i, int j, int k) {
        return Vec3{reg.center.x - R + (i + 0.5) * h, reg.center.y - R + (j + 0.5) * h,
                    reg.center.z - R + (k + 0.5) * h};
    };
    for (int k = 0; k < m; ++k)
        for (int j = 0; j < m; ++j)
            for (int i = 0; i < m; ++i) {
                double d = dist(center_of(i, j, k), reg.center);
                if (d > reg.r_inner && d < reg.r_control) {
                    id[i + m * (j + m * k)] = static_cast<int>(cells.size());
                    cells.push_back({i, j, k});
                }
            }

    NeumannOperator L;
    L.nbr.resize(cells.size());
    L.diag.assign(cells.size(), 0.0);
    double w = 1.0 / (h * h);
    const int off[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    for (std::size_t c = 0; c < cells.size(); ++c) {
        auto [i, j, k] = cells[c];
        for (auto& o : off) {
            int ni = i + o[0], nj = j + o[1], nk = k + o[2];
            if (ni < 0 || nj < 0 || nk < 0 || ni >= m || nj >= m || nk >= m) continue;
            int nid = id[ni + m * (nj + m * nk)];
            if (nid < 0) continue;
            L.nbr[c].push_back({nid, w});
            L.diag[c] += w;
        }
    }
    double lambda = smallest_nonzero_eigenvalue(L);
    return 1.0 / std::sqrt(lambda);
}

double poincare_constant_interval(int n) {
    if (n < 4) fail(ErrorKind::UnderResolved, "interval mode needs >= 4 cells");
    NeumannOperator L;
    L.nbr.resize(n);
    L.diag.assign(n, 0.0);
    double h = 1.0 / n;
    double w = 1.0 / (h * h);
    for (int i = 0; i < n; ++i) {
        if (i > 0) {
            L.nbr[i].push_back({i - 1, w});
            L.diag[i] += w;
        }
        if (i + 1 < n) {
            L.nbr[i].push_back({i + 1, w});
            L.diag[i] += w;
        }
    }
    return 1.0 / std::sqrt(smallest_nonzero_eigenvalue(L));
}

} // namespace divinv
