#pragma once

#include <memory>
#include <string>
#include <vector>

#include "divinv/grid.hpp"

namespace divinv {

/// Cell-centered scalar samples with a shared region mask.
struct ScalarField {
    Grid grid;
    std::vector<double> values;
    std::shared_ptr<const CellMask> mask;

    ScalarField() = default;
    explicit ScalarField(std::shared_ptr<const CellMask> m)
        : grid(m->grid), values(m->grid.cells(), 0.0), mask(std::move(m)) {}

    double& at(int i, int j, int k) { return values[grid.cell_index(i, j, k)]; }
    double at(int i, int j, int k) const { return values[grid.cell_index(i, j, k)]; }
};

/// Face-centered vector samples (MAC layout) with a shared region mask.
struct VectorField {
    Grid grid;
    std::vector<double> comp[3];
    std::shared_ptr<const CellMask> mask;

    VectorField() = default;
    explicit VectorField(std::shared_ptr<const CellMask> m) : grid(m->grid), mask(std::move(m)) {
        for (int a = 0; a < 3; ++a) comp[a].assign(grid.faces(a), 0.0);
    }

    double& at(int axis, int i, int j, int k) { return comp[axis][grid.face_index(axis, i, j, k)]; }
    double at(int axis, int i, int j, int k) const {
        return comp[axis][grid.face_index(axis, i, j, k)];
    }

    /// Zero all components on non-fluid faces (trace clamp).
    void clamp_nonfluid();
};

/// Per-cell sum of face differences over h; exact on componentwise-linear fields.
ScalarField discrete_divergence(const VectorField& u);

/// Face differences of adjacent cell values over h; zero on non-fluid faces.
/// Negative adjoint of discrete_divergence under the masked inner products.
VectorField discrete_gradient(const ScalarField& p);

/// Midpoint-rule L^q norm over fluid cells. Requires q > 1.
double lq_norm(const ScalarField& f, double q);
/// Midpoint-rule L^q norm over fluid faces (all three components pooled).
double lq_norm(const VectorField& u, double q);

/// L^q norm of the staggered difference quotients of u whose full stencil is
/// fluid. Trace quotients against clamped faces are not counted here; the
/// solver energy in divsolve includes them.
double w1q_seminorm(const VectorField& u, double q);

/// Same, restricted to quotients anchored at cells with select[c] != 0.
double w1q_seminorm_on(const VectorField& u, double q, const std::vector<char>& select);

/// Subtract the mean over cells with region[c] != 0.
/// Returns the subtracted mean.
double zero_mean_project(ScalarField& f, const std::vector<char>& region);
/// Convenience: project over the field's fluid cells.
double zero_mean_project(ScalarField& f);

double masked_mean(const ScalarField& f, const std::vector<char>& region);

std::vector<char> fluid_cells(const CellMask& mask);

/// Zero extension from the perforated domain to the whole domain: hole cells
/// become fluid carrying the value 0. The masked integral is preserved exactly.
ScalarField extend_by_zero(const ScalarField& f);

// --- file formats ----------------------------------------------------------

/// `DIVINV-FIELD v1 <scalar|vector> nx ny nz h` + little-endian f64 payload,
/// x-fastest; three face blocks for vector fields.
void write_field(const std::string& path, const ScalarField& f);
void write_field(const std::string& path, const VectorField& u);
ScalarField read_scalar_field(const std::string& path);
VectorField read_vector_field(const std::string& path);

struct NormRow {
    std::string name;
    double q;
    double value;
};

/// CSV with header `name,q,value`.
std::string norms_to_csv(const std::vector<NormRow>& rows);

/// Printf-style shortest round-trip double formatting used by every CSV/JSON
/// writer (byte-stable output).
std::string format_double(double v);

} // namespace divinv
