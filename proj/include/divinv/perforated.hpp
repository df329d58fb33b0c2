#pragma once

#include <vector>

#include "divinv/cutoffs.hpp"
#include "divinv/divsolve.hpp"

namespace divinv {

/// Per-hole corrector data. The discrete cutoff radii are snapped to the grid
/// so the telescoping cancellation at clamped faces is exact in floating
/// point: the plateau covers every face of a staircase hole cell, and the
/// support retreats one cell from the control ball so local fixes embed
/// strictly inside it.
struct HoleCorrector {
    int hole = -1;
    bool empty = false;        // no cell center fell inside the hole
    Vec3 mean{};               // <u>_{D_n}
    BumpProfile chi{};         // discrete chi_n radii
    BumpProfile phi{};         // discrete phi_n radii
    VectorField b;             // chi * (u - mean)
    VectorField beta;          // phi * mean
    VectorField fix_E;         // B_E(div b), zero-extended
    VectorField fix_F;         // B_F(div beta), zero-extended
    std::vector<char> cells_E; // support region of div b (minus holes)
    std::vector<char> cells_F;
    double compat_E = 0;       // integral of div b over E before projection
    double compat_F = 0;
    int iters_E = 0, iters_F = 0;
};

struct CorrectorSet {
    std::vector<HoleCorrector> holes;
};

/// Component-wise mean of u over the annulus D_n (face values averaged to
/// centers). Requires >= 3 cells across the annulus width.
Vec3 annulus_mean(const VectorField& u, const PerforatedDomain& dom, int n);

struct CorrectorParams {
    double tol = 1e-6;             // budget for the final right-inverse residual
    double rhs_l2 = 0;             // ||f||_2 of the pipeline rhs (plain cell l2)
    double compat_gate = 1e-10;    // (zero-mean1) tolerance factor
    SolverParams solver{};
    bool with_fixes = true;        // solve the local problems (build_correctors only)
};

/// Correctors and local fixes for every hole.
CorrectorSet build_correctors(const VectorField& u, const PerforatedDomain& dom,
                              const CutoffSet& cutoffs, const CorrectorParams& params);

struct RestrictDiag {
    double hole_trace_max = 0;   // max |value| on non-fluid faces before clamping
    double post_residual = 0;    // ||div R(u) - div u||_2 / ||div u||_2 on fluid cells
    std::vector<HoleCorrector> per_hole; // fields released, diagnostics kept
};

/// Restriction-type operator: u - sum_n (b_n - B_E(div b_n)) - sum_n
/// (beta_n - B_F(div beta_n)), then hole/exterior faces clamped to exact zero.
/// `mask` must carry the perforated tags (holes are non-fluid).
VectorField apply_restriction(const VectorField& u, const PerforatedDomain& dom,
                              const CutoffSet& cutoffs, const CellMask& mask,
                              const CorrectorParams& params, RestrictDiag* diag = nullptr);

struct QNorm {
    double q;
    double lq;
    double w1q;
};

struct HoleDiag {
    int hole;
    bool empty;
    double compat_E, compat_F;
    int iters_E, iters_F;
};

struct PerforatedSolution {
    VectorField u;
    double residual = 0;        // ||div u - f||_2 / ||f||_2 over fluid cells
    double hole_trace_max = 0;  // pre-clamp
    int iterations = 0;         // whole-domain solve
    std::vector<QNorm> norms;
    std::vector<HoleDiag> per_hole;
};

/// The composed operator: extend by zero, whole-domain Bogovskii solve with
/// the chosen backend, then the restriction. Returns a field with exact zero
/// trace on hole and exterior faces and div u = f on fluid cells within tol.
PerforatedSolution bogovskii_perforated(const ScalarField& f, const PerforatedDomain& dom,
                                        const CutoffSet& cutoffs, Backend backend, double tol,
                                        const std::vector<double>& q_list,
                                        const SolverParams& solver = {});

} // namespace divinv
