#include "divinv/perforated.hpp"

#include <algorithm>
#include <cmath>

#include "divinv/errors.hpp"

namespace divinv {

namespace {

struct Window {
    int lo[3], hi[3]; // clipped cell-index window
};

Window ball_window(const Grid& g, const Vec3& c, double radius, int pad = 1) {
    Window w;
    double lo[3] = {c.x - radius, c.y - radius, c.z - radius};
    double hi[3] = {c.x + radius, c.y + radius, c.z + radius};
    int n[3] = {g.nx, g.ny, g.nz};
    double glo[3] = {g.lo.x, g.lo.y, g.lo.z};
    double h[3] = {g.hx, g.hy, g.hz};
    for (int d = 0; d < 3; ++d) {
        w.lo[d] = std::max(0, static_cast<int>(std::floor((lo[d] - glo[d]) / h[d])) - pad);
        w.hi[d] = std::min(n[d], static_cast<int>(std::ceil((hi[d] - glo[d]) / h[d])) + pad);
    }
    return w;
}

double face_dist(const Grid& g, int axis, int i, int j, int k, const Vec3& c) {
    return dist(g.face_center(axis, i, j, k), c);
}

// Largest |x_f - x_n| over the faces of hole-n cells; 0 when the discrete
// hole is empty.
double hole_face_cover_radius(const CellMask& mask, const PerforatedDomain& dom, int n) {
    const Grid& g = mask.grid;
    const auto& reg = dom.regions(n);
    Window w = ball_window(g, reg.center, reg.r_cover, 1);
    double cover = 0.0;
    bool any = false;
    for (int k = w.lo[2]; k < w.hi[2]; ++k)
        for (int j = w.lo[1]; j < w.hi[1]; ++j)
            for (int i = w.lo[0]; i < w.hi[0]; ++i) {
                if (mask.hole_index(g.cell_index(i, j, k)) != n) continue;
                any = true;
                cover = std::max({cover, face_dist(g, 0, i, j, k, reg.center),
                                  face_dist(g, 0, i + 1, j, k, reg.center),
                                  face_dist(g, 1, i, j, k, reg.center),
                                  face_dist(g, 1, i, j + 1, k, reg.center),
                                  face_dist(g, 2, i, j, k, reg.center),
                                  face_dist(g, 2, i, j, k + 1, reg.center)});
            }
    return any ? cover : -1.0;
}

double plain_l2(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

// Support region of a corrector built from a bump with outer radius b_r:
// fluid cells having at least one face strictly inside radius b_r.
std::vector<char> support_cells(const CellMask& mask, const Vec3& c, double b_r) {
    const Grid& g = mask.grid;
    std::vector<char> sel(g.cells(), 0);
    Window w = ball_window(g, c, b_r, 1);
    for (int k = w.lo[2]; k < w.hi[2]; ++k)
        for (int j = w.lo[1]; j < w.hi[1]; ++j)
            for (int i = w.lo[0]; i < w.hi[0]; ++i) {
                std::size_t idx = g.cell_index(i, j, k);
                if (!mask.is_fluid(idx)) continue;
                double dmin = std::min({face_dist(g, 0, i, j, k, c), face_dist(g, 0, i + 1, j, k, c),
                                        face_dist(g, 1, i, j, k, c), face_dist(g, 1, i, j + 1, k, c),
                                        face_dist(g, 2, i, j, k, c), face_dist(g, 2, i, j, k + 1, c)});
                if (dmin < b_r) sel[idx] = 1;
            }
    return sel;
}

// Windowed product of a radial bump with (u - m) or with the constant m.
void fill_corrector(const Grid& g, const Vec3& c, const BumpProfile& prof, const VectorField& u,
                    const Vec3& m, bool subtract_from_u, VectorField& out) {
    Window w = ball_window(g, c, prof.b, 1);
    for (int a = 0; a < 3; ++a) {
        int lo[3] = {w.lo[0], w.lo[1], w.lo[2]};
        int hi[3] = {w.hi[0] + (a == 0), w.hi[1] + (a == 1), w.hi[2] + (a == 2)};
        hi[0] = std::min(hi[0], g.face_count(a, 0));
        hi[1] = std::min(hi[1], g.face_count(a, 1));
        hi[2] = std::min(hi[2], g.face_count(a, 2));
        for (int k = lo[2]; k < hi[2]; ++k)
            for (int j = lo[1]; j < hi[1]; ++j)
                for (int i = lo[0]; i < hi[0]; ++i) {
                    double v = prof.value(face_dist(g, a, i, j, k, c));
                    if (v == 0.0) continue;
                    std::size_t fi = g.face_index(a, i, j, k);
                    double base = subtract_from_u ? u.comp[a][fi] - m[a] : m[a];
                    out.comp[a][fi] = v * base;
                }
    }
}

// div over a window (the corrector vanishes elsewhere)
void add_div_window(const Grid& g, const VectorField& v, const Window& w,
                    std::vector<double>& out) {
    for (int k = w.lo[2]; k < w.hi[2]; ++k)
        for (int j = w.lo[1]; j < w.hi[1]; ++j)
            for (int i = w.lo[0]; i < w.hi[0]; ++i) {
                double s = (v.at(0, i + 1, j, k) - v.at(0, i, j, k)) / g.hx +
                           (v.at(1, i, j + 1, k) - v.at(1, i, j, k)) / g.hy +
                           (v.at(2, i, j, k + 1) - v.at(2, i, j, k)) / g.hz;
                out[g.cell_index(i, j, k)] = s;
            }
}

struct LocalFix {
    VectorField u;
    double compat = 0;
    int iters = 0;
    bool solved = false;
};

// Project div(corr) to zero mean on `cells`, check the (zero-mean1) gate, and
// solve the local problem.
LocalFix solve_fix(const CellMask& mask, const std::vector<char>& cells, const Window& w,
                   const VectorField& corr, double grad_u_l2, const CorrectorParams& params,
                   const char* what, int hole) {
    const Grid& g = mask.grid;
    LocalFix fix;

    ScalarField rhs(std::make_shared<CellMask>(mask));
    add_div_window(g, corr, w, rhs.values);
    for (std::size_t c = 0; c < rhs.values.size(); ++c)
        if (!cells[c]) rhs.values[c] = 0.0;

    std::size_t count = 0;
    double integral = 0;
    for (std::size_t c = 0; c < cells.size(); ++c)
        if (cells[c]) {
            ++count;
            integral += rhs.values[c];
        }
    if (count < 4)
        fail(ErrorKind::UnderResolved, std::string(what) + " region of hole " +
                                           std::to_string(hole) + " spans fewer than 4 cells");

    double vol = g.cell_volume();
    double region_measure = static_cast<double>(count) * vol;
    fix.compat = integral * vol;
    double gate = params.compat_gate * grad_u_l2 * std::sqrt(region_measure) + 1e-300;
    if (std::abs(fix.compat) > gate)
        fail(ErrorKind::CompatibilityViolated,
             std::string("zero-mean check failed on ") + what + " of hole " +
                 std::to_string(hole) + ": integral " + std::to_string(fix.compat) +
                 " exceeds gate " + std::to_string(gate));

    // exact compatibility for the local solve
    double mean = integral / static_cast<double>(count);
    for (std::size_t c = 0; c < cells.size(); ++c)
        if (cells[c]) rhs.values[c] -= mean;

    double rhs_norm = plain_l2(rhs.values);
    if (rhs_norm == 0.0) {
        fix.u = VectorField(rhs.mask);
        fix.solved = true;
        return fix;
    }

    SolverParams sp = params.solver;
    double budget = 0.25 * params.tol * (params.rhs_l2 > 0 ? params.rhs_l2 : rhs_norm);
    sp.tol = std::clamp(budget / rhs_norm, 1e-13, 0.49);
    DivSolveSolution sol = min_energy_rightinverse(mask, cells, rhs, sp);
    fix.u = std::move(sol.u);
    fix.iters = sol.iterations;
    fix.solved = true;
    return fix;
}

HoleCorrector build_one(const VectorField& u, const PerforatedDomain& dom,
                        const CutoffSet& cutoffs, const CellMask& mask, int n,
                        double grad_u_l2, const CorrectorParams& params) {
    const Grid& g = mask.grid;
    const auto& reg = dom.regions(n);
    double h = std::max({g.hx, g.hy, g.hz});

    HoleCorrector hc;
    hc.hole = n;

    double cover = hole_face_cover_radius(mask, dom, n);
    if (cover < 0) {
        hc.empty = true; // the grid does not resolve this hole at all
        return hc;
    }

    hc.mean = annulus_mean(u, dom, n);

    const BumpProfile& chi0 = cutoffs.chi_profile(n);
    const BumpProfile& phi0 = cutoffs.phi_profile(n);
    hc.chi.a = std::max(chi0.a, cover);
    hc.chi.b = reg.r_control - 1.25 * h;
    if (!(hc.chi.b > hc.chi.a + 0.25 * h))
        fail(ErrorKind::UnderResolved,
             "hole " + std::to_string(n) + ": chi transition collapses at this resolution");
    hc.phi.a = std::max(phi0.a, cover);
    hc.phi.b = std::max(phi0.b - 1.25 * h, hc.phi.a + 1.25 * h);
    if (hc.phi.b + 1.5 * h > reg.r_control)
        fail(ErrorKind::UnderResolved,
             "hole " + std::to_string(n) + ": phi support would leave the control ball");

    hc.b = VectorField(u.mask);
    hc.beta = VectorField(u.mask);
    fill_corrector(g, reg.center, hc.chi, u, hc.mean, true, hc.b);
    fill_corrector(g, reg.center, hc.phi, u, hc.mean, false, hc.beta);

    hc.cells_E = support_cells(mask, reg.center, hc.chi.b);
    hc.cells_F = support_cells(mask, reg.center, hc.phi.b);

    if (params.with_fixes) {
        Window wE = ball_window(g, reg.center, hc.chi.b, 1);
        Window wF = ball_window(g, reg.center, hc.phi.b, 1);
        LocalFix fE = solve_fix(mask, hc.cells_E, wE, hc.b, grad_u_l2, params, "E", n);
        LocalFix fF = solve_fix(mask, hc.cells_F, wF, hc.beta, grad_u_l2, params, "F", n);
        hc.fix_E = std::move(fE.u);
        hc.fix_F = std::move(fF.u);
        hc.compat_E = fE.compat;
        hc.compat_F = fF.compat;
        hc.iters_E = fE.iters;
        hc.iters_F = fF.iters;
    }
    return hc;
}

} // namespace

Vec3 annulus_mean(const VectorField& u, const PerforatedDomain& dom, int n) {
    const Grid& g = u.grid;
    const auto& reg = dom.regions(n);
    double width = reg.r_control - reg.r_inner;
    double h = std::max({g.hx, g.hy, g.hz});
    if (width < 3.0 * h)
        fail(ErrorKind::UnderResolved, "annulus D of hole " + std::to_string(n) +
                                           " is not resolved by 3 cells radially");
    Window w = ball_window(g, reg.center, reg.r_control, 0);
    Vec3 acc{};
    long long count = 0;
    for (int k = w.lo[2]; k < w.hi[2]; ++k)
        for (int j = w.lo[1]; j < w.hi[1]; ++j)
            for (int i = w.lo[0]; i < w.hi[0]; ++i) {
                if (!u.mask->is_fluid(g.cell_index(i, j, k))) continue;
                double d = dist(g.cell_center(i, j, k), reg.center);
                if (!(d > reg.r_inner && d < reg.r_control)) continue;
                acc.x += 0.5 * (u.at(0, i, j, k) + u.at(0, i + 1, j, k));
                acc.y += 0.5 * (u.at(1, i, j, k) + u.at(1, i, j + 1, k));
                acc.z += 0.5 * (u.at(2, i, j, k) + u.at(2, i, j, k + 1));
                ++count;
            }
    if (count == 0)
        fail(ErrorKind::UnderResolved, "annulus D of hole " + std::to_string(n) + " has no cells");
    return acc * (1.0 / static_cast<double>(count));
}

CorrectorSet build_correctors(const VectorField& u, const PerforatedDomain& dom,
                              const CutoffSet& cutoffs, const CorrectorParams& params) {
    CellMask mask = build_cell_mask(dom, u.grid);
    double grad_u = w1q_seminorm(u, 2.0);
    CorrectorSet set;
    for (int n = 0; n < dom.hole_count(); ++n)
        set.holes.push_back(build_one(u, dom, cutoffs, mask, n, grad_u, params));
    return set;
}

VectorField apply_restriction(const VectorField& u, const PerforatedDomain& dom,
                              const CutoffSet& cutoffs, const CellMask& mask,
                              const CorrectorParams& params, RestrictDiag* diag) {
    const Grid& g = u.grid;
    double grad_u = w1q_seminorm(u, 2.0); // scale for the compatibility gates

    VectorField out(std::make_shared<CellMask>(mask));
    for (int a = 0; a < 3; ++a) out.comp[a] = u.comp[a];

    RestrictDiag local_diag;
    for (int n = 0; n < dom.hole_count(); ++n) {
        HoleCorrector hc = build_one(u, dom, cutoffs, mask, n, grad_u, params);
        if (!hc.empty) {
            for (int a = 0; a < 3; ++a) {
                for (std::size_t f = 0; f < out.comp[a].size(); ++f) {
                    double corr = hc.b.comp[a][f] + hc.beta.comp[a][f];
                    if (params.with_fixes)
                        corr -= hc.fix_E.comp[a][f] + hc.fix_F.comp[a][f];
                    if (corr != 0.0) out.comp[a][f] -= corr;
                }
            }
        }
        // release the fields, keep the numbers
        HoleCorrector slim;
        slim.hole = hc.hole;
        slim.empty = hc.empty;
        slim.mean = hc.mean;
        slim.chi = hc.chi;
        slim.phi = hc.phi;
        slim.compat_E = hc.compat_E;
        slim.compat_F = hc.compat_F;
        slim.iters_E = hc.iters_E;
        slim.iters_F = hc.iters_F;
        local_diag.per_hole.push_back(std::move(slim));
    }

    // telescoping check on the clamped faces, then the clamp itself
    double umax = 0;
    for (int a = 0; a < 3; ++a)
        for (double v : u.comp[a]) umax = std::max(umax, std::abs(v));
    double trace_max = 0;
    for (int a = 0; a < 3; ++a) {
        int fi = g.face_count(a, 0), fj = g.face_count(a, 1), fk = g.face_count(a, 2);
        for (int k = 0; k < fk; ++k)
            for (int j = 0; j < fj; ++j)
                for (int i = 0; i < fi; ++i)
                    if (!mask.face_fluid(a, i, j, k)) {
                        double& v = out.comp[a][g.face_index(a, i, j, k)];
                        trace_max = std::max(trace_max, std::abs(v));
                        v = 0.0;
                    }
    }
    local_diag.hole_trace_max = trace_max;
    if (trace_max > 1e-10 * (umax + 1e-300))
        fail(ErrorKind::CompatibilityViolated,
             "restriction telescoping failed: hole-face residue " + std::to_string(trace_max) +
                 " exceeds 1e-10 * ||u||_inf");

    // post-clamp divergence must match div u on fluid cells
    ScalarField div_u = discrete_divergence(u);
    ScalarField div_out = discrete_divergence(out);
    double num = 0, den = 0;
    for (std::size_t c = 0; c < div_u.values.size(); ++c) {
        if (!mask.is_fluid(c)) continue;
        double d = div_out.values[c] - div_u.values[c];
        num += d * d;
        den += div_u.values[c] * div_u.values[c];
    }
    local_diag.post_residual = den > 0 ? std::sqrt(num / den) : 0.0;

    if (diag) *diag = std::move(local_diag);
    return out;
}

PerforatedSolution bogovskii_perforated(const ScalarField& f, const PerforatedDomain& dom,
                                        const CutoffSet& cutoffs, Backend backend, double tol,
                                        const std::vector<double>& q_list,
                                        const SolverParams& solver) {
    const CellMask& mask = *f.mask;

    // zero-mean gate on the perforated domain
    std::vector<char> fluid = fluid_cells(mask);
    double f_l2 = 0;
    double mean = 0;
    std::size_t n_fluid = 0;
    for (std::size_t c = 0; c < f.values.size(); ++c)
        if (fluid[c]) {
            f_l2 += f.values[c] * f.values[c];
            mean += f.values[c];
            ++n_fluid;
        }
    if (n_fluid == 0) fail(ErrorKind::EmptyRegion, "no fluid cells");
    f_l2 = std::sqrt(f_l2);
    mean /= static_cast<double>(n_fluid);
    if (std::abs(mean) > 1e-12 * (f_l2 + 1e-300))
        fail(ErrorKind::MeanNotZero, "rhs mean over the fluid region exceeds 1e-12 * ||f||");

    PerforatedSolution out;

    if (f_l2 == 0.0) {
        out.u = VectorField(f.mask);
        for (double q : q_list) out.norms.push_back({q, 0.0, 0.0});
        return out;
    }

    // extension to the whole domain
    ScalarField f_ext = extend_by_zero(f);
    std::vector<char> whole(f_ext.values.size(), 0);
    for (std::size_t c = 0; c < whole.size(); ++c)
        whole[c] = f_ext.mask->in_domain(c) ? 1 : 0;

    // the restriction's compatibility gates need a tight whole-domain solve
    SolverParams sp = solver;
    sp.tol = std::min(0.25 * tol, 1e-11);
    DivSolveSolution whole_sol =
        backend == Backend::Integral
            ? [&] {
                  SolverParams spi = solver;
                  spi.tol = 0.25 * tol;
                  return bogovskii_integral(*f_ext.mask, whole, dom.base(), f_ext, spi);
              }()
            : min_energy_rightinverse(*f_ext.mask, whole, f_ext, sp);
    out.iterations = whole_sol.iterations;

    CorrectorParams cp;
    cp.tol = tol;
    cp.rhs_l2 = f_l2;
    cp.solver = solver;

    RestrictDiag rdiag;
    out.u = apply_restriction(whole_sol.u, dom, cutoffs, mask, cp, &rdiag);
    out.hole_trace_max = rdiag.hole_trace_max;
    for (const auto& hc : rdiag.per_hole)
        out.per_hole.push_back(
            {hc.hole, hc.empty, hc.compat_E, hc.compat_F, hc.iters_E, hc.iters_F});

    // final right-inverse residual on fluid cells
    ScalarField div_u = discrete_divergence(out.u);
    double num = 0;
    for (std::size_t c = 0; c < div_u.values.size(); ++c) {
        if (!fluid[c]) continue;
        double d = div_u.values[c] - f.values[c];
        num += d * d;
    }
    out.residual = std::sqrt(num) / f_l2;
    if (out.residual > tol)
        fail(ErrorKind::ResidualTooLarge, "composed operator residual " +
                                              std::to_string(out.residual) + " exceeds tol " +
                                              std::to_string(tol));

    for (double q : q_list) out.norms.push_back({q, lq_norm(out.u, q), w1q_seminorm(out.u, q)});
    return out;
}

} // namespace divinv
