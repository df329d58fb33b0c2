#pragma once

#include <cstdint>
#include <vector>

#include "divinv/geometry.hpp"

namespace divinv {

/// Uniform staggered (MAC) grid: scalars at cell centers, vector component i
/// at faces normal to axis i.
struct Grid {
    Vec3 lo{};
    int nx = 0, ny = 0, nz = 0;
    double hx = 0, hy = 0, hz = 0;

    Grid() = default;
    Grid(Vec3 lo_, int nx_, int ny_, int nz_, double hx_, double hy_, double hz_)
        : lo(lo_), nx(nx_), ny(ny_), nz(nz_), hx(hx_), hy(hy_), hz(hz_) {}

    /// Cubic-cell grid covering the bounding box of a base domain, nx cells
    /// along x; ny/nz follow from the box aspect.
    static Grid cover(const BaseDomain& base, int nx);

    std::size_t cells() const { return std::size_t(nx) * ny * nz; }
    std::size_t faces(int axis) const {
        switch (axis) {
        case 0: return std::size_t(nx + 1) * ny * nz;
        case 1: return std::size_t(nx) * (ny + 1) * nz;
        default: return std::size_t(nx) * ny * (nz + 1);
        }
    }
    double cell_volume() const { return hx * hy * hz; }
    double spacing(int axis) const { return axis == 0 ? hx : (axis == 1 ? hy : hz); }

    std::size_t cell_index(int i, int j, int k) const {
        return std::size_t(i) + std::size_t(nx) * (std::size_t(j) + std::size_t(ny) * k);
    }
    std::size_t face_index(int axis, int i, int j, int k) const {
        switch (axis) {
        case 0: return std::size_t(i) + std::size_t(nx + 1) * (std::size_t(j) + std::size_t(ny) * k);
        case 1: return std::size_t(i) + std::size_t(nx) * (std::size_t(j) + std::size_t(ny + 1) * k);
        default: return std::size_t(i) + std::size_t(nx) * (std::size_t(j) + std::size_t(ny) * k);
        }
    }
    int face_count(int axis, int dim) const {
        int n = dim == 0 ? nx : (dim == 1 ? ny : nz);
        return dim == axis ? n + 1 : n;
    }

    Vec3 cell_center(int i, int j, int k) const {
        return {lo.x + (i + 0.5) * hx, lo.y + (j + 0.5) * hy, lo.z + (k + 0.5) * hz};
    }
    Vec3 face_center(int axis, int i, int j, int k) const {
        Vec3 p{lo.x + (i + 0.5) * hx, lo.y + (j + 0.5) * hy, lo.z + (k + 0.5) * hz};
        p[axis] -= 0.5 * spacing(axis);
        return p;
    }

    bool isotropic(double rel = 1e-12) const {
        return std::abs(hx - hy) <= rel * hx && std::abs(hx - hz) <= rel * hx;
    }
};

/// Per-cell region tags: 0 = outside, 1 = fluid, 2+n = hole n.
struct CellMask {
    Grid grid;
    std::vector<std::int32_t> tag;

    static constexpr std::int32_t kOutside = 0;
    static constexpr std::int32_t kFluid = 1;

    bool is_fluid(std::size_t c) const { return tag[c] == kFluid; }
    bool is_hole(std::size_t c) const { return tag[c] >= 2; }
    bool in_domain(std::size_t c) const { return tag[c] != kOutside; }
    int hole_index(std::size_t c) const { return tag[c] >= 2 ? tag[c] - 2 : -1; }

    std::size_t count_fluid() const;
    /// Face is fluid iff both adjacent cells are in-grid and fluid.
    bool face_fluid(int axis, int i, int j, int k) const;
};

/// Classify every cell center of `grid` against the perforated domain.
CellMask build_cell_mask(const PerforatedDomain& dom, const Grid& grid);

/// All-fluid mask (plain box domain, no holes).
CellMask full_fluid_mask(const Grid& grid);

} // namespace divinv
