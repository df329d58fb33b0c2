#include "divinv/divsolve.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "divinv/errors.hpp"
#include "divinv/fft_poisson.hpp"
#include "divinv/parallel.hpp"

namespace divinv {

namespace {

constexpr double kPi = 3.14159265358979323846;

// ---------------------------------------------------------------------------
// Compact region representation: active faces carry the DOFs, region cells
// carry the constraint. Precomputed index lists keep the matrix-free kernels
// branch-light.

struct FaceRef {
    int i, j, k;
};

struct RegionOps {
    const Grid* grid;
    std::vector<std::size_t> cell_gidx; // region cells, (k,j,i)-ascending
    std::vector<int> cell_face[3][2];   // compact face id of lo/hi face per axis, -1 inactive
    std::vector<FaceRef> faces[3];
    std::vector<int> face_nbr[3];       // 6 compact neighbor ids per face (lazy), -1 if absent
    std::vector<int> face_cell_lo[3], face_cell_hi[3]; // compact cell ids
    std::vector<std::vector<int>> face_id;             // global face -> compact id
    bool full_box = false;

    std::size_t n_cells() const { return cell_gidx.size(); }
    std::size_t n_faces(int a) const { return faces[a].size(); }
};

RegionOps build_region_ops(const CellMask& mask, const std::vector<char>& region) {
    const Grid& g = mask.grid;
    RegionOps R;
    R.grid = &g;

    std::vector<int> cell_id(g.cells(), -1);
    for (int k = 0; k < g.nz; ++k)
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                std::size_t c = g.cell_index(i, j, k);
                if (region[c]) {
                    cell_id[c] = static_cast<int>(R.cell_gidx.size());
                    R.cell_gidx.push_back(c);
                }
            }
    R.full_box = R.cell_gidx.size() == g.cells();

    // active faces: both adjacent cells in the region
    R.face_id.resize(3);
    for (int a = 0; a < 3; ++a) {
        R.face_id[a].assign(g.faces(a), -1);
        int fi = g.face_count(a, 0), fj = g.face_count(a, 1), fk = g.face_count(a, 2);
        int di = a == 0, dj = a == 1, dk = a == 2;
        for (int k = 0; k < fk; ++k)
            for (int j = 0; j < fj; ++j)
                for (int i = 0; i < fi; ++i) {
                    int li = i - di, lj = j - dj, lk = k - dk;
                    if (li < 0 || lj < 0 || lk < 0) continue;
                    if ((a == 0 && i >= g.nx) || (a == 1 && j >= g.ny) || (a == 2 && k >= g.nz))
                        continue;
                    if (cell_id[g.cell_index(li, lj, lk)] < 0 ||
                        cell_id[g.cell_index(i, j, k)] < 0)
                        continue;
                    R.face_id[a][g.face_index(a, i, j, k)] = static_cast<int>(R.faces[a].size());
                    R.faces[a].push_back({i, j, k});
                    R.face_cell_lo[a].push_back(cell_id[g.cell_index(li, lj, lk)]);
                    R.face_cell_hi[a].push_back(cell_id[g.cell_index(i, j, k)]);
                }
    }

    for (int a = 0; a < 3; ++a)
        for (int side = 0; side < 2; ++side) R.cell_face[a][side].assign(R.n_cells(), -1);
    for (std::size_t c = 0; c < R.cell_gidx.size(); ++c) {
        std::size_t gi = R.cell_gidx[c];
        int i = static_cast<int>(gi % g.nx);
        int j = static_cast<int>((gi / g.nx) % g.ny);
        int k = static_cast<int>(gi / (std::size_t(g.nx) * g.ny));
        R.cell_face[0][0][c] = R.face_id[0][g.face_index(0, i, j, k)];
        R.cell_face[0][1][c] = R.face_id[0][g.face_index(0, i + 1, j, k)];
        R.cell_face[1][0][c] = R.face_id[1][g.face_index(1, i, j, k)];
        R.cell_face[1][1][c] = R.face_id[1][g.face_index(1, i, j + 1, k)];
        R.cell_face[2][0][c] = R.face_id[2][g.face_index(2, i, j, k)];
        R.cell_face[2][1][c] = R.face_id[2][g.face_index(2, i, j, k + 1)];
    }
    return R;
}

// Neighbor lists feed the CG fallback; the DST path never needs them.
void build_face_neighbors(RegionOps& R) {
    const Grid& g = *R.grid;
    for (int a = 0; a < 3; ++a) {
        if (!R.face_nbr[a].empty()) continue;
        R.face_nbr[a].assign(R.faces[a].size() * 6, -1);
        int fi = g.face_count(a, 0), fj = g.face_count(a, 1), fk = g.face_count(a, 2);
        for (std::size_t f = 0; f < R.faces[a].size(); ++f) {
            const FaceRef& fr = R.faces[a][f];
            int s = 0;
            for (int d = 0; d < 3; ++d)
                for (int sgn = -1; sgn <= 1; sgn += 2, ++s) {
                    int ni = fr.i + (d == 0 ? sgn : 0);
                    int nj = fr.j + (d == 1 ? sgn : 0);
                    int nk = fr.k + (d == 2 ? sgn : 0);
                    if (ni < 0 || nj < 0 || nk < 0 || ni >= fi || nj >= fj || nk >= fk) continue;
                    R.face_nbr[a][f * 6 + s] = R.face_id[a][g.face_index(a, ni, nj, nk)];
                }
        }
    }
}

struct FaceVecs {
    std::vector<double> v[3];
    void resize(const RegionOps& R) {
        for (int a = 0; a < 3; ++a) v[a].assign(R.n_faces(a), 0.0);
    }
    void axpy(double alpha, const FaceVecs& o) {
        for (int a = 0; a < 3; ++a)
            for (std::size_t f = 0; f < v[a].size(); ++f) v[a][f] += alpha * o.v[a][f];
    }
};

// div: active faces -> region cells
void apply_div(const RegionOps& R, const FaceVecs& u, std::vector<double>& out) {
    out.assign(R.n_cells(), 0.0);
    for (int a = 0; a < 3; ++a) {
        double inv_h = 1.0 / R.grid->spacing(a);
        for (std::size_t c = 0; c < R.n_cells(); ++c) {
            int lo = R.cell_face[a][0][c], hi = R.cell_face[a][1][c];
            double ulo = lo >= 0 ? u.v[a][lo] : 0.0;
            double uhi = hi >= 0 ? u.v[a][hi] : 0.0;
            out[c] += (uhi - ulo) * inv_h;
        }
    }
}

// div^T: region cells -> active faces, (p_lo - p_hi)/h
void apply_divT(const RegionOps& R, const std::vector<double>& p, FaceVecs& out) {
    for (int a = 0; a < 3; ++a) {
        double inv_h = 1.0 / R.grid->spacing(a);
        out.v[a].assign(R.n_faces(a), 0.0);
        for (std::size_t f = 0; f < R.n_faces(a); ++f)
            out.v[a][f] = (p[R.face_cell_lo[a][f]] - p[R.face_cell_hi[a][f]]) * inv_h;
    }
}

// component Laplacian with zero Dirichlet outside the active set
void apply_A(const RegionOps& R, int a, const std::vector<double>& x, std::vector<double>& out) {
    const Grid& g = *R.grid;
    double w[3] = {1.0 / (g.hx * g.hx), 1.0 / (g.hy * g.hy), 1.0 / (g.hz * g.hz)};
    double diag = 2.0 * (w[0] + w[1] + w[2]);
    out.assign(x.size(), 0.0);
    const int* nbr = R.face_nbr[a].data();
    for (std::size_t f = 0; f < x.size(); ++f) {
        double s = diag * x[f];
        const int* nb = nbr + f * 6;
        for (int d = 0; d < 3; ++d) {
            double acc = 0.0;
            if (nb[2 * d] >= 0) acc += x[nb[2 * d]];
            if (nb[2 * d + 1] >= 0) acc += x[nb[2 * d + 1]];
            s -= acc * w[d];
        }
        out[f] = s;
    }
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    return blocked_sum(a.size(), 1, [&](std::size_t i) { return a[i] * b[i]; });
}

double norm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

// Jacobi-preconditioned CG on the component Laplacian (the diagonal is
// constant, so the preconditioner is a fixed scaling).
int cg_component(const RegionOps& R, int a, const std::vector<double>& rhs,
                 std::vector<double>& x, double rel_tol, int max_iter) {
    const Grid& g = *R.grid;
    double diag = 2.0 * (1.0 / (g.hx * g.hx) + 1.0 / (g.hy * g.hy) + 1.0 / (g.hz * g.hz));
    double inv_diag = 1.0 / diag;

    std::size_t n = rhs.size();
    x.assign(n, 0.0);
    double rhs_norm = norm2(rhs);
    if (rhs_norm == 0.0) return 0;
    double target = rel_tol * rhs_norm;

    std::vector<double> r = rhs, z(n), p(n), Ap(n);
    for (std::size_t i = 0; i < n; ++i) z[i] = r[i] * inv_diag;
    p = z;
    double rz = dot(r, z);
    double best = rhs_norm;
    int stalled = 0;
    for (int it = 1; it <= max_iter; ++it) {
        apply_A(R, a, p, Ap);
        double pAp = dot(p, Ap);
        if (pAp <= 0.0) break;
        double alpha = rz / pAp;
        for (std::size_t i = 0; i < n; ++i) x[i] += alpha * p[i];
        for (std::size_t i = 0; i < n; ++i) r[i] -= alpha * Ap[i];
        double rn = norm2(r);
        if (rn <= target) return it;
        if (rn < best * 0.999) {
            best = rn;
            stalled = 0;
        } else if (++stalled >= 25) {
            return it; // round-off floor; the outer residual test governs
        }
        for (std::size_t i = 0; i < n; ++i) z[i] = r[i] * inv_diag;
        double rz_new = dot(r, z);
        double beta = rz_new / rz;
        rz = rz_new;
        for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    return max_iter;
}

// Inner solve dispatcher: exact DST inverse on a full box, CG otherwise.
struct InnerSolver {
    const RegionOps* R;
    double rel_tol;
    int max_iter;
    std::unique_ptr<DstPoisson3D> dst[3];

    InnerSolver(RegionOps& reg, double tol, int cap) : R(&reg), rel_tol(tol), max_iter(cap) {
        if (reg.full_box) {
            const Grid& g = *reg.grid;
            dst[0] = std::make_unique<DstPoisson3D>(g.nx - 1, g.ny, g.nz, g.hx, g.hy, g.hz);
            dst[1] = std::make_unique<DstPoisson3D>(g.nx, g.ny - 1, g.nz, g.hx, g.hy, g.hz);
            dst[2] = std::make_unique<DstPoisson3D>(g.nx, g.ny, g.nz - 1, g.hx, g.hy, g.hz);
        } else {
            build_face_neighbors(reg);
        }
    }

    // Solves A w = b componentwise; returns total inner iterations.
    int solve(const FaceVecs& b, FaceVecs& w) {
        int iters = 0;
        for (int a = 0; a < 3; ++a) {
            if (dst[a]) {
                w.v[a] = b.v[a]; // active faces enumerate the DST lattice in order
                dst[a]->solve(w.v[a]);
            } else {
                iters += cg_component(*R, a, b.v[a], w.v[a], rel_tol, max_iter);
            }
        }
        return iters;
    }
};

void project_zero_mean(std::vector<double>& v) {
    if (v.empty()) return;
    double m = blocked_sum(v.size(), 1, [&](std::size_t i) { return v[i]; }) /
               static_cast<double>(v.size());
    for (auto& x : v) x -= m;
}

struct UzawaResult {
    FaceVecs u;
    double residual;
    int outer;
};

// Pressure-Schur CG: S lambda = f with S = div A^{-1} div^T; u = A^{-1} div^T lambda
// accumulates alongside lambda so the divergence residual is the CG residual.
UzawaResult uzawa_solve(RegionOps& R, const std::vector<double>& f,
                        const SolverParams& params) {
    UzawaResult res;
    res.u.resize(R);
    res.outer = 0;

    double f_norm = norm2(f);
    res.residual = 0.0;
    if (f_norm == 0.0) return res;

    InnerSolver inner(R, std::max(params.inner_tol_factor * params.tol, 1e-13),
                      params.max_inner);

    std::vector<double> r = f, p, Sp(R.n_cells());
    project_zero_mean(r);
    p = r;
    FaceVecs dtp, w;
    dtp.resize(R);
    w.resize(R);

    double rr = dot(r, r);
    double target = params.tol * f_norm;
    if (std::sqrt(rr) <= target) return res;

    for (int it = 1; it <= params.max_outer; ++it) {
        res.outer = it;
        apply_divT(R, p, dtp);
        inner.solve(dtp, w);
        apply_div(R, w, Sp);
        project_zero_mean(Sp);
        double pSp = dot(p, Sp);
        if (!(pSp > 0.0)) break;
        double alpha = rr / pSp;
        res.u.axpy(alpha, w);
        for (std::size_t c = 0; c < r.size(); ++c) r[c] -= alpha * Sp[c];
        project_zero_mean(r);
        double rr_new = dot(r, r);
        if (std::sqrt(rr_new) <= target) {
            // trust but verify against the accumulated u
            std::vector<double> du;
            apply_div(R, res.u, du);
            double t = 0;
            for (std::size_t c = 0; c < du.size(); ++c) {
                double d = du[c] - f[c];
                t += d * d;
            }
            res.residual = std::sqrt(t) / f_norm;
            if (res.residual <= params.tol) return res;
            rr_new = t; // recurrence drifted; continue with the true residual
            for (std::size_t c = 0; c < du.size(); ++c) r[c] = f[c] - du[c];
            project_zero_mean(r);
            rr_new = dot(r, r);
        }
        double beta = rr_new / rr;
        rr = rr_new;
        for (std::size_t c = 0; c < p.size(); ++c) p[c] = r[c] + beta * p[c];
    }

    std::vector<double> du;
    apply_div(R, res.u, du);
    double t = 0;
    for (std::size_t c = 0; c < du.size(); ++c) {
        double d = du[c] - f[c];
        t += d * d;
    }
    res.residual = std::sqrt(t) / f_norm;
    if (res.residual > params.tol)
        fail(ErrorKind::NonConvergence,
             "pressure-Schur iteration: residual " + std::to_string(res.residual) +
                 " > tol after " + std::to_string(res.outer) + " outer iterations");
    return res;
}

VectorField scatter_to_field(const RegionOps& R, const FaceVecs& u,
                             std::shared_ptr<const CellMask> mask) {
    VectorField out(std::move(mask));
    const Grid& g = *R.grid;
    for (int a = 0; a < 3; ++a)
        for (std::size_t f = 0; f < R.n_faces(a); ++f) {
            const FaceRef& fr = R.faces[a][f];
            out.comp[a][g.face_index(a, fr.i, fr.j, fr.k)] = u.v[a][f];
        }
    return out;
}

std::vector<double> gather_rhs(const RegionOps& R, const ScalarField& rhs) {
    std::vector<double> f(R.n_cells());
    for (std::size_t c = 0; c < R.n_cells(); ++c) f[c] = rhs.values[R.cell_gidx[c]];
    return f;
}

void check_zero_mean(const std::vector<double>& f) {
    if (f.empty()) fail(ErrorKind::EmptyRegion, "divergence solve on empty region");
    double mean = 0;
    for (double v : f) mean += v;
    mean /= static_cast<double>(f.size());
    double n2 = norm2(f);
    if (std::abs(mean) > 1e-12 * (n2 + 1e-300))
        fail(ErrorKind::MeanNotZero,
             "rhs mean " + std::to_string(mean) + " exceeds 1e-12 * ||rhs||");
}

} // namespace

bool region_connected(const Grid& grid, const std::vector<char>& region) {
    std::size_t start = region.size();
    std::size_t count = 0;
    for (std::size_t c = 0; c < region.size(); ++c)
        if (region[c]) {
            if (start == region.size()) start = c;
            ++count;
        }
    if (count == 0) return true;
    std::vector<char> seen(region.size(), 0);
    std::vector<std::size_t> stack{start};
    seen[start] = 1;
    std::size_t visited = 0;
    while (!stack.empty()) {
        std::size_t c = stack.back();
        stack.pop_back();
        ++visited;
        int i = static_cast<int>(c % grid.nx);
        int j = static_cast<int>((c / grid.nx) % grid.ny);
        int k = static_cast<int>(c / (std::size_t(grid.nx) * grid.ny));
        const int off[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
        for (auto& o : off) {
            int ni = i + o[0], nj = j + o[1], nk = k + o[2];
            if (ni < 0 || nj < 0 || nk < 0 || ni >= grid.nx || nj >= grid.ny || nk >= grid.nz)
                continue;
            std::size_t nc = grid.cell_index(ni, nj, nk);
            if (region[nc] && !seen[nc]) {
                seen[nc] = 1;
                stack.push_back(nc);
            }
        }
    }
    return visited == count;
}

DivSolveSolution min_energy_rightinverse(const CellMask& mask, const std::vector<char>& region,
                                         const ScalarField& rhs, const SolverParams& params) {
    RegionOps R = build_region_ops(mask, region);
    std::vector<double> f = gather_rhs(R, rhs);
    check_zero_mean(f);
    UzawaResult ur = uzawa_solve(R, f, params);
    DivSolveSolution sol;
    sol.u = scatter_to_field(R, ur.u, rhs.mask);
    sol.residual = ur.residual;
    sol.iterations = ur.outer;
    return sol;
}

// ---------------------------------------------------------------------------
// Explicit Bogovskii construction.
//
// omega(x) = (1 - |x-c|^2/r^2)^5 / Z on the star ball (Z normalizes the
// integral to 1); along any ray the integrand of the kernel's radial integral
// is a degree-12 polynomial, so 7-point Gauss-Legendre integrates it exactly,
// and the fifth-order vanishing at the support edge keeps the face fluxes
// smooth where a ray grazes the ball.

namespace {

struct StarBump {
    Vec3 c;
    double r;
    double invZ;

    explicit StarBump(const BaseDomain& base) : c(base.star_center), r(base.star_radius) {
        // integral of (1 - |x|^2/r^2)^5 over the ball is 1024 pi r^3 / 9009
        invZ = 9009.0 / (1024.0 * kPi * r * r * r);
    }
};

const double kGL7x[7] = {0.0,
                         -0.4058451513773972, 0.4058451513773972,
                         -0.7415311855993945, 0.7415311855993945,
                         -0.9491079123427585, 0.9491079123427585};
const double kGL7w[7] = {0.4179591836734694, 0.3818300505051189, 0.3818300505051189,
                         0.2797053914892766, 0.2797053914892766, 0.1294849661688697,
                         0.1294849661688697};
const double kGL4x[4] = {-0.3399810435848563, 0.3399810435848563, -0.8611363115940526,
                         0.8611363115940526};
const double kGL4w[4] = {0.6521451548625461, 0.6521451548625461, 0.3478548451374538,
                         0.3478548451374538};
const double kGL3x[3] = {0.0, -0.7745966692414834, 0.7745966692414834};
const double kGL3w[3] = {0.8888888888888889, 0.5555555555555556, 0.5555555555555556};
const double kGL6x[6] = {-0.2386191860831969, 0.2386191860831969, -0.6612093864662645,
                         0.6612093864662645, -0.9324695142031521, 0.9324695142031521};
const double kGL6w[6] = {0.4679139345726910, 0.4679139345726910, 0.3607615730481386,
                         0.3607615730481386, 0.1713244923791704, 0.1713244923791704};

// integral_s^inf omega(y + t e) t^2 dt along the unit ray e from y
double radial_integral(const StarBump& w, const Vec3& y, const Vec3& e, double s) {
    Vec3 yc = y - w.c;
    double beta = e.dot(yc);
    double gamma0 = yc.norm2();
    double disc = beta * beta - gamma0 + w.r * w.r;
    if (disc <= 0.0) return 0.0;
    double sq = std::sqrt(disc);
    double t1 = -beta - sq, t2 = -beta + sq;
    double lo = std::max(s, t1);
    if (lo >= t2) return 0.0;
    double mid = 0.5 * (lo + t2), half = 0.5 * (t2 - lo);
    double inv_r2 = 1.0 / (w.r * w.r);
    double acc = 0.0;
    for (int i = 0; i < 7; ++i) {
        double t = mid + half * kGL7x[i];
        double q = 1.0 - (t * t + 2.0 * beta * t + gamma0) * inv_r2;
        double q2 = q * q;
        acc += kGL7w[i] * q2 * q2 * q * t * t;
    }
    return acc * half * w.invZ;
}

// K(x,y) . e_axis with K(x,y) = (x-y)/|x-y|^3 * radial integral
double kernel_component(const StarBump& w, const Vec3& x, const Vec3& y, int axis) {
    Vec3 d = x - y;
    double s2 = d.norm2();
    double s = std::sqrt(s2);
    if (s == 0.0) return 0.0;
    double I = radial_integral(w, y, d * (1.0 / s), s);
    if (I == 0.0) return 0.0;
    return d[axis] / (s2 * s) * I;
}

// Average of K . e_axis over a face rectangle: adaptive quadtree subdivision
// near the source (depth capped at 3) with the leaf Gauss order graded by the
// size/distance ratio.
double face_flux_avg(const StarBump& w, const Vec3& center, int axis, int ua, int va,
                     double half_u, double half_v, const Vec3& y, int depth) {
    double diam = 2.0 * std::max(half_u, half_v);
    double d = dist(center, y);
    if (depth < 3 && diam > 0.35 * d) {
        double acc = 0.0;
        for (int su = -1; su <= 1; su += 2)
            for (int sv = -1; sv <= 1; sv += 2) {
                Vec3 c = center;
                c[ua] += su * half_u * 0.5;
                c[va] += sv * half_v * 0.5;
                acc += face_flux_avg(w, c, axis, ua, va, half_u * 0.5, half_v * 0.5, y, depth + 1);
            }
        return 0.25 * acc;
    }
    const double* gx;
    const double* gw;
    int order;
    double ratio = d > 0 ? diam / d : 1.0;
    if (ratio > 0.3) {
        gx = kGL6x;
        gw = kGL6w;
        order = 6;
    } else if (ratio > 0.12) {
        gx = kGL4x;
        gw = kGL4w;
        order = 4;
    } else {
        gx = kGL3x;
        gw = kGL3w;
        order = 3;
    }
    double acc = 0.0;
    for (int iu = 0; iu < order; ++iu)
        for (int iv = 0; iv < order; ++iv) {
            Vec3 p = center;
            p[ua] += gx[iu] * half_u;
            p[va] += gx[iv] * half_v;
            acc += gw[iu] * gw[iv] * kernel_component(w, p, y, axis);
        }
    return 0.25 * acc; // GL weights sum to 2 per direction
}

void check_star_shaped(const CellMask& mask, const std::vector<char>& region,
                       const BaseDomain& base) {
    const Grid& g = mask.grid;
    double hmin = std::min({g.hx, g.hy, g.hz});
    std::vector<std::size_t> cells;
    for (std::size_t c = 0; c < region.size(); ++c)
        if (region[c]) cells.push_back(c);
    std::size_t stride = std::max<std::size_t>(1, cells.size() / 256);

    auto cell_of = [&](const Vec3& p, int& i, int& j, int& k) {
        i = static_cast<int>(std::floor((p.x - g.lo.x) / g.hx));
        j = static_cast<int>(std::floor((p.y - g.lo.y) / g.hy));
        k = static_cast<int>(std::floor((p.z - g.lo.z) / g.hz));
        return i >= 0 && j >= 0 && k >= 0 && i < g.nx && j < g.ny && k < g.nz;
    };
    auto near_region = [&](const Vec3& p) {
        int i, j, k;
        if (!cell_of(p, i, j, k)) return false;
        for (int dk = -1; dk <= 1; ++dk)
            for (int dj = -1; dj <= 1; ++dj)
                for (int di = -1; di <= 1; ++di) {
                    int ni = i + di, nj = j + dj, nk = k + dk;
                    if (ni < 0 || nj < 0 || nk < 0 || ni >= g.nx || nj >= g.ny || nk >= g.nz)
                        continue;
                    if (region[g.cell_index(ni, nj, nk)]) return true;
                }
        return false;
    };

    for (std::size_t s = 0; s < cells.size(); s += stride) {
        std::size_t c = cells[s];
        int i = static_cast<int>(c % g.nx);
        int j = static_cast<int>((c / g.nx) % g.ny);
        int k = static_cast<int>(c / (std::size_t(g.nx) * g.ny));
        Vec3 from = g.cell_center(i, j, k);
        Vec3 to = base.star_center;
        double len = dist(from, to);
        int steps = std::max(2, static_cast<int>(std::ceil(len / (0.5 * hmin))));
        for (int t = 1; t < steps; ++t) {
            Vec3 p = from + (to - from) * (double(t) / steps);
            if (!near_region(p))
                fail(ErrorKind::NotStarShaped,
                     "segment from a region cell to the star center leaves the region");
        }
    }
}

} // namespace

DivSolveSolution bogovskii_integral(const CellMask& mask, const std::vector<char>& region,
                                    const BaseDomain& base, const ScalarField& rhs,
                                    const SolverParams& params) {
    const Grid& g = mask.grid;
    RegionOps R = build_region_ops(mask, region);
    std::vector<double> f = gather_rhs(R, rhs);
    check_zero_mean(f);
    check_star_shaped(mask, region, base);

    StarBump bump(base);

    // source list: region cells with nonzero rhs
    struct Src {
        Vec3 y;
        double wf;
    };
    std::vector<Src> sources;
    double reach = bump.r;
    double vol = g.cell_volume();
    for (std::size_t c = 0; c < R.n_cells(); ++c) {
        if (f[c] == 0.0) continue;
        std::size_t gi = R.cell_gidx[c];
        int i = static_cast<int>(gi % g.nx);
        int j = static_cast<int>((gi / g.nx) % g.ny);
        int k = static_cast<int>(gi / (std::size_t(g.nx) * g.ny));
        Vec3 y = g.cell_center(i, j, k);
        sources.push_back({y, vol * f[c]});
        reach = std::max(reach, dist(y, bump.c));
    }

    DivSolveSolution sol;
    sol.u = [&] {
        FaceVecs u;
        u.resize(R);
        double hmax = std::max({g.hx, g.hy, g.hz});
        for (int a = 0; a < 3; ++a) {
            int ua = (a + 1) % 3, va = (a + 2) % 3;
            double half_u = 0.5 * g.spacing(ua), half_v = 0.5 * g.spacing(va);
            parallel_for(R.n_faces(a), params.threads, [&](std::size_t f0, std::size_t f1) {
                for (std::size_t fc = f0; fc < f1; ++fc) {
                    const FaceRef& fr = R.faces[a][fc];
                    Vec3 xf = g.face_center(a, fr.i, fr.j, fr.k);
                    // fluxes vanish outside the star hull of supp f and the bump
                    if (dist(xf, bump.c) > reach + hmax) continue;
                    double acc = 0.0;
                    for (const Src& src : sources)
                        acc += src.wf * face_flux_avg(bump, xf, a, ua, va, half_u, half_v, src.y, 0);
                    u.v[a][fc] = acc;
                }
            });
        }
        return scatter_to_field(R, u, rhs.mask);
    }();

    // residual of the assembled field
    std::vector<double> du(R.n_cells(), 0.0);
    {
        FaceVecs uv;
        uv.resize(R);
        for (int a = 0; a < 3; ++a)
            for (std::size_t fc = 0; fc < R.n_faces(a); ++fc) {
                const FaceRef& fr = R.faces[a][fc];
                uv.v[a][fc] = sol.u.comp[a][g.face_index(a, fr.i, fr.j, fr.k)];
            }
        apply_div(R, uv, du);
    }
    double f_norm = norm2(f);
    double t = 0;
    for (std::size_t c = 0; c < du.size(); ++c) {
        double d = du[c] - f[c];
        t += d * d;
    }
    sol.residual = f_norm > 0 ? std::sqrt(t) / f_norm : 0.0;
    sol.iterations = 0;
    if (sol.residual > params.tol)
        fail(ErrorKind::ResidualTooLarge,
             "integral backend residual " + std::to_string(sol.residual) + " > tol " +
                 std::to_string(params.tol) + " at quadrature refinement cap");
    return sol;
}

DivSolveSolution solve_divergence(const DivSolveProblem& problem, const BaseDomain& base,
                                  const SolverParams& params) {
    if (!region_connected(problem.rhs.grid, problem.region))
        fail(ErrorKind::EmptyRegion, "solve region is not connected");
    SolverParams p = params;
    p.tol = problem.tol;
    DivSolveSolution sol =
        problem.backend == Backend::Integral
            ? bogovskii_integral(*problem.rhs.mask, problem.region, base, problem.rhs, p)
            : min_energy_rightinverse(*problem.rhs.mask, problem.region, problem.rhs, p);
    sol.lq = lq_norm(sol.u, problem.q_report);
    sol.w1q = w1q_seminorm(sol.u, problem.q_report);
    return sol;
}

namespace {

std::vector<char> ball_region_cells(const PerforatedDomain& dom, const CellMask& mask, int n,
                                    double radius, int* count) {
    const Grid& g = mask.grid;
    const Vec3 c = dom.regions(n).center;
    std::vector<char> sel(g.cells(), 0);
    int cnt = 0;
    for (int k = 0; k < g.nz; ++k)
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                std::size_t idx = g.cell_index(i, j, k);
                if (!mask.is_fluid(idx)) continue;
                if (dist(g.cell_center(i, j, k), c) < radius) {
                    sel[idx] = 1;
                    ++cnt;
                }
            }
    *count = cnt;
    return sel;
}

DivSolveSolution local_solve(const PerforatedDomain& dom, const CellMask& mask, int n,
                             double radius, const char* what, const ScalarField& rhs,
                             const SolverParams& params) {
    int count = 0;
    std::vector<char> sel = ball_region_cells(dom, mask, n, radius, &count);
    if (count < 4)
        fail(ErrorKind::UnderResolved, std::string(what) + " region of hole " +
                                           std::to_string(n) + " spans " + std::to_string(count) +
                                           " cells (< 4)");
    return min_energy_rightinverse(mask, sel, rhs, params);
}

} // namespace

DivSolveSolution local_solve_E(const PerforatedDomain& dom, const CellMask& mask, int n,
                               const ScalarField& rhs, const SolverParams& params) {
    return local_solve(dom, mask, n, dom.regions(n).r_control, "E", rhs, params);
}

DivSolveSolution local_solve_F(const PerforatedDomain& dom, const CellMask& mask, int n,
                               const ScalarField& rhs, const SolverParams& params) {
    return local_solve(dom, mask, n, dom.regions(n).r_cover, "F", rhs, params);
}

std::string diag_csv_header() { return "region,backend,q,residual,iterations,grad_norm\n"; }

std::string diag_csv_row(const SolveDiag& d) {
    return d.region + "," + backend_name(d.backend) + "," + format_double(d.q) + "," +
           format_double(d.residual) + "," + std::to_string(d.iterations) + "," +
           format_double(d.grad_norm) + "\n";
}

namespace detail {

double solver_energy(const CellMask& mask, const std::vector<char>& region,
                     const VectorField& u) {
    const Grid& g = mask.grid;
    double vol = g.cell_volume();

    auto active = [&](int a, int i, int j, int k) {
        int di = a == 0, dj = a == 1, dk = a == 2;
        int li = i - di, lj = j - dj, lk = k - dk;
        if (li < 0 || lj < 0 || lk < 0) return false;
        if ((a == 0 && i >= g.nx) || (a == 1 && j >= g.ny) || (a == 2 && k >= g.nz)) return false;
        return region[g.cell_index(li, lj, lk)] != 0 && region[g.cell_index(i, j, k)] != 0;
    };

    // every adjacent same-component pair with at least one active endpoint,
    // ghosts and clamped faces contributing zero
    double acc = 0.0;
    for (int a = 0; a < 3; ++a) {
        int fi = g.face_count(a, 0), fj = g.face_count(a, 1), fk = g.face_count(a, 2);
        for (int d = 0; d < 3; ++d) {
            double h = g.spacing(d);
            int di = d == 0, dj = d == 1, dk = d == 2;
            for (int k = 0; k <= fk - (1 - dk); ++k)
                for (int j = 0; j <= fj - (1 - dj); ++j)
                    for (int i = 0; i <= fi - (1 - di); ++i) {
                        // pair (hi - d, hi) where hi = (i,j,k); hi may be one
                        // past the lattice along d
                        int hi_i = i, hi_j = j, hi_k = k;
                        int lo_i = i - di, lo_j = j - dj, lo_k = k - dk;
                        bool hi_in = hi_i < fi && hi_j < fj && hi_k < fk;
                        bool lo_in = lo_i >= 0 && lo_j >= 0 && lo_k >= 0;
                        bool hi_act = hi_in && active(a, hi_i, hi_j, hi_k);
                        bool lo_act = lo_in && active(a, lo_i, lo_j, lo_k);
                        if (!hi_act && !lo_act) continue;
                        double vhi = hi_act ? u.comp[a][g.face_index(a, hi_i, hi_j, hi_k)] : 0.0;
                        double vlo = lo_act ? u.comp[a][g.face_index(a, lo_i, lo_j, lo_k)] : 0.0;
                        double quot = (vhi - vlo) / h;
                        acc += quot * quot * vol;
                    }
        }
    }
    return acc;
}

} // namespace detail

} // namespace divinv
