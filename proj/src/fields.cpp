#include "divinv/fields.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "divinv/errors.hpp"
#include "divinv/parallel.hpp"

namespace divinv {

Grid Grid::cover(const BaseDomain& base, int nx) {
    Vec3 lo, hi;
    base.bounding_box(lo, hi);
    double Lx = hi.x - lo.x, Ly = hi.y - lo.y, Lz = hi.z - lo.z;
    double h = Lx / nx;
    int ny = std::max(4, static_cast<int>(std::lround(Ly / h)));
    int nz = std::max(4, static_cast<int>(std::lround(Lz / h)));
    return Grid(lo, nx, ny, nz, h, Ly / ny, Lz / nz);
}

std::size_t CellMask::count_fluid() const {
    std::size_t n = 0;
    for (auto t : tag)
        if (t == kFluid) ++n;
    return n;
}

bool CellMask::face_fluid(int axis, int i, int j, int k) const {
    int li = i, lj = j, lk = k;
    switch (axis) {
    case 0: --li; break;
    case 1: --lj; break;
    default: --lk; break;
    }
    if (li < 0 || lj < 0 || lk < 0) return false;
    int hi_i = i, hi_j = j, hi_k = k;
    if ((axis == 0 && i >= grid.nx) || (axis == 1 && j >= grid.ny) || (axis == 2 && k >= grid.nz))
        return false;
    return tag[grid.cell_index(li, lj, lk)] == kFluid &&
           tag[grid.cell_index(hi_i, hi_j, hi_k)] == kFluid;
}

CellMask build_cell_mask(const PerforatedDomain& dom, const Grid& grid) {
    CellMask m;
    m.grid = grid;
    m.tag.assign(grid.cells(), CellMask::kOutside);
    for (int k = 0; k < grid.nz; ++k)
        for (int j = 0; j < grid.ny; ++j)
            for (int i = 0; i < grid.nx; ++i) {
                Vec3 p = grid.cell_center(i, j, k);
                PointClass c = classify_point(dom, p);
                std::int32_t t = CellMask::kOutside;
                if (c.tag == RegionTag::Fluid) t = CellMask::kFluid;
                if (c.tag == RegionTag::Hole) t = 2 + c.hole;
                m.tag[grid.cell_index(i, j, k)] = t;
            }
    return m;
}

CellMask full_fluid_mask(const Grid& grid) {
    CellMask m;
    m.grid = grid;
    m.tag.assign(grid.cells(), CellMask::kFluid);
    return m;
}

void VectorField::clamp_nonfluid() {
    const Grid& g = grid;
    for (int axis = 0; axis < 3; ++axis) {
        int fi = g.face_count(axis, 0), fj = g.face_count(axis, 1), fk = g.face_count(axis, 2);
        for (int k = 0; k < fk; ++k)
            for (int j = 0; j < fj; ++j)
                for (int i = 0; i < fi; ++i)
                    if (!mask->face_fluid(axis, i, j, k))
                        comp[axis][g.face_index(axis, i, j, k)] = 0.0;
    }
}

ScalarField discrete_divergence(const VectorField& u) {
    ScalarField d(u.mask);
    const Grid& g = u.grid;
    for (int k = 0; k < g.nz; ++k)
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                double s = (u.at(0, i + 1, j, k) - u.at(0, i, j, k)) / g.hx +
                           (u.at(1, i, j + 1, k) - u.at(1, i, j, k)) / g.hy +
                           (u.at(2, i, j, k + 1) - u.at(2, i, j, k)) / g.hz;
                d.at(i, j, k) = s;
            }
    return d;
}

VectorField discrete_gradient(const ScalarField& p) {
    VectorField v(p.mask);
    const Grid& g = p.grid;
    for (int axis = 0; axis < 3; ++axis) {
        int fi = g.face_count(axis, 0), fj = g.face_count(axis, 1), fk = g.face_count(axis, 2);
        double h = g.spacing(axis);
        for (int k = 0; k < fk; ++k)
            for (int j = 0; j < fj; ++j)
                for (int i = 0; i < fi; ++i) {
                    if (!p.mask->face_fluid(axis, i, j, k)) continue;
                    int li = i - (axis == 0), lj = j - (axis == 1), lk = k - (axis == 2);
                    v.at(axis, i, j, k) = (p.at(i, j, k) - p.at(li, lj, lk)) / h;
                }
    }
    return v;
}

double lq_norm(const ScalarField& f, double q) {
    if (!(q > 1.0)) fail(ErrorKind::BadExponent, "lq_norm requires q > 1");
    double vol = f.grid.cell_volume();
    double s = blocked_sum(f.values.size(), 1, [&](std::size_t c) {
        return f.mask->is_fluid(c) ? std::pow(std::abs(f.values[c]), q) * vol : 0.0;
    });
    return std::pow(s, 1.0 / q);
}

double lq_norm(const VectorField& u, double q) {
    if (!(q > 1.0)) fail(ErrorKind::BadExponent, "lq_norm requires q > 1");
    const Grid& g = u.grid;
    double vol = g.cell_volume();
    double s = 0.0;
    for (int axis = 0; axis < 3; ++axis) {
        int fi = g.face_count(axis, 0), fj = g.face_count(axis, 1), fk = g.face_count(axis, 2);
        for (int k = 0; k < fk; ++k)
            for (int j = 0; j < fj; ++j)
                for (int i = 0; i < fi; ++i)
                    if (u.mask->face_fluid(axis, i, j, k))
                        s += std::pow(std::abs(u.at(axis, i, j, k)), q) * vol;
    }
    return std::pow(s, 1.0 / q);
}

namespace {

// Visit all staggered difference quotients of u whose stencil is fluid:
// diagonal quotients d(u_a)/d(x_a) anchored at fluid cells, off-diagonal
// quotients between pairs of adjacent fluid faces.
template <class Fn>
void visit_interior_quotients(const VectorField& u, Fn&& fn) {
    const Grid& g = u.grid;
    const CellMask& m = *u.mask;
    for (int k = 0; k < g.nz; ++k)
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                std::size_t c = g.cell_index(i, j, k);
                if (!m.is_fluid(c)) continue;
                fn(c, (u.at(0, i + 1, j, k) - u.at(0, i, j, k)) / g.hx);
                fn(c, (u.at(1, i, j + 1, k) - u.at(1, i, j, k)) / g.hy);
                fn(c, (u.at(2, i, j, k + 1) - u.at(2, i, j, k)) / g.hz);
            }
    for (int axis = 0; axis < 3; ++axis) {
        int fi = g.face_count(axis, 0), fj = g.face_count(axis, 1), fk = g.face_count(axis, 2);
        for (int d = 0; d < 3; ++d) {
            if (d == axis) continue;
            double h = g.spacing(d);
            int di = d == 0, dj = d == 1, dk = d == 2;
            for (int k = 0; k + dk < fk; ++k)
                for (int j = 0; j + dj < fj; ++j)
                    for (int i = 0; i + di < fi; ++i) {
                        if (!m.face_fluid(axis, i, j, k) ||
                            !m.face_fluid(axis, i + di, j + dj, k + dk))
                            continue;
                        // anchor: the cell on the low side of the shared edge
                        std::size_t c = g.cell_index(std::min(i, g.nx - 1),
                                                     std::min(j, g.ny - 1),
                                                     std::min(k, g.nz - 1));
                        fn(c, (u.at(axis, i + di, j + dj, k + dk) - u.at(axis, i, j, k)) / h);
                    }
        }
    }
}

} // namespace

double w1q_seminorm(const VectorField& u, double q) {
    if (!(q > 1.0)) fail(ErrorKind::BadExponent, "w1q_seminorm requires q > 1");
    double vol = u.grid.cell_volume();
    double s = 0.0;
    visit_interior_quotients(u, [&](std::size_t, double quot) {
        s += std::pow(std::abs(quot), q) * vol;
    });
    return std::pow(s, 1.0 / q);
}

double w1q_seminorm_on(const VectorField& u, double q, const std::vector<char>& select) {
    if (!(q > 1.0)) fail(ErrorKind::BadExponent, "w1q_seminorm requires q > 1");
    double vol = u.grid.cell_volume();
    double s = 0.0;
    visit_interior_quotients(u, [&](std::size_t c, double quot) {
        if (select[c]) s += std::pow(std::abs(quot), q) * vol;
    });
    return std::pow(s, 1.0 / q);
}

double masked_mean(const ScalarField& f, const std::vector<char>& region) {
    double s = 0.0;
    std::size_t n = 0;
    for (std::size_t c = 0; c < f.values.size(); ++c) {
        if (region[c]) {
            s += f.values[c];
            ++n;
        }
    }
    if (n == 0) fail(ErrorKind::EmptyRegion, "zero_mean_project on empty region");
    return s / static_cast<double>(n);
}

double zero_mean_project(ScalarField& f, const std::vector<char>& region) {
    double mean = masked_mean(f, region);
    for (std::size_t c = 0; c < f.values.size(); ++c)
        if (region[c]) f.values[c] -= mean;
    return mean;
}

std::vector<char> fluid_cells(const CellMask& mask) {
    std::vector<char> sel(mask.tag.size(), 0);
    for (std::size_t c = 0; c < mask.tag.size(); ++c) sel[c] = mask.is_fluid(c) ? 1 : 0;
    return sel;
}

double zero_mean_project(ScalarField& f) {
    return zero_mean_project(f, fluid_cells(*f.mask));
}

ScalarField extend_by_zero(const ScalarField& f) {
    auto ext = std::make_shared<CellMask>(*f.mask);
    for (auto& t : ext->tag)
        if (t >= 2) t = CellMask::kFluid;
    ScalarField out(std::move(ext));
    for (std::size_t c = 0; c < f.values.size(); ++c)
        out.values[c] = f.mask->is_hole(c) ? 0.0 : f.values[c];
    return out;
}

// --- file formats ----------------------------------------------------------

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace {

void write_header(std::ofstream& out, const char* kind, const Grid& g) {
    if (!g.isotropic())
        fail(ErrorKind::Io, "field file format stores a single spacing; grid is anisotropic");
    out << "DIVINV-FIELD v1 " << kind << ' ' << g.nx << ' ' << g.ny << ' ' << g.nz << ' '
        << format_double(g.hx) << '\n';
}

void write_block(std::ofstream& out, const std::vector<double>& v) {
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
}

struct Header {
    std::string kind;
    int nx, ny, nz;
    double h;
};

Header read_header(std::ifstream& in, const std::string& path) {
    std::string line;
    if (!std::getline(in, line)) fail(ErrorKind::Io, "empty field file " + path);
    std::istringstream ss(line);
    std::string magic, ver;
    Header h{};
    ss >> magic >> ver >> h.kind >> h.nx >> h.ny >> h.nz >> h.h;
    if (magic != "DIVINV-FIELD" || ver != "v1" || !ss)
        fail(ErrorKind::Io, "bad field header in " + path);
    return h;
}

void read_block(std::ifstream& in, std::vector<double>& v, const std::string& path) {
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
    if (!in) fail(ErrorKind::Io, "truncated field payload in " + path);
}

} // namespace

void write_field(const std::string& path, const ScalarField& f) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::Io, "cannot write " + path);
    write_header(out, "scalar", f.grid);
    write_block(out, f.values);
}

void write_field(const std::string& path, const VectorField& u) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::Io, "cannot write " + path);
    write_header(out, "vector", u.grid);
    for (int a = 0; a < 3; ++a) write_block(out, u.comp[a]);
}

ScalarField read_scalar_field(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot open " + path);
    Header h = read_header(in, path);
    if (h.kind != "scalar") fail(ErrorKind::Io, path + " is not a scalar field");
    Grid g({0, 0, 0}, h.nx, h.ny, h.nz, h.h, h.h, h.h);
    ScalarField f(std::make_shared<CellMask>(full_fluid_mask(g)));
    read_block(in, f.values, path);
    return f;
}

VectorField read_vector_field(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot open " + path);
    Header h = read_header(in, path);
    if (h.kind != "vector") fail(ErrorKind::Io, path + " is not a vector field");
    Grid g({0, 0, 0}, h.nx, h.ny, h.nz, h.h, h.h, h.h);
    VectorField u(std::make_shared<CellMask>(full_fluid_mask(g)));
    for (int a = 0; a < 3; ++a) read_block(in, u.comp[a], path);
    return u;
}

std::string norms_to_csv(const std::vector<NormRow>& rows) {
    std::string out = "name,q,value\n";
    for (const auto& r : rows)
        out += r.name + "," + format_double(r.q) + "," + format_double(r.value) + "\n";
    return out;
}

} // namespace divinv
