#pragma once

#include <string>
#include <vector>

#include "divinv/fields.hpp"

namespace divinv {

enum class Backend { Integral, MinEnergy };

inline const char* backend_name(Backend b) {
    return b == Backend::Integral ? "integral" : "minenergy";
}

struct SolverParams {
    double tol = 1e-6;          // relative divergence residual target
    int max_outer = 500;        // Uzawa/pressure-Schur iterations
    int max_inner = 5000;       // CG iterations on the vector Laplacian
    double inner_tol_factor = 0.1; // inner CG tolerance = factor * outer target
    int threads = 1;
};

struct DivSolveSolution {
    VectorField u;
    double residual = 0;   // ||div u - f||_2 / ||f||_2 over the region
    int iterations = 0;    // outer iterations
    double lq = 0;         // ||u||_{L^q(region faces)}
    double w1q = 0;        // ||grad u||_{L^q} (interior quotients)
};

struct DivSolveProblem {
    std::vector<char> region; // cell selector over the mask's grid
    ScalarField rhs;          // zero masked mean over the region
    double q_report = 2.0;
    double tol = 1e-6;
    Backend backend = Backend::MinEnergy;
};

/// 6-connectivity flood fill.
bool region_connected(const Grid& grid, const std::vector<char>& region);

/// Checks the problem invariants (zero mean within 1e-12*||rhs||, connected
/// region) and dispatches on the backend. The integral backend additionally
/// needs the star ball of `base`.
DivSolveSolution solve_divergence(const DivSolveProblem& problem, const BaseDomain& base,
                                  const SolverParams& params);

/// Gradient-energy minimizing right inverse of the divergence on the selected
/// cells, zero trace on every non-region face. Pressure-Schur (Uzawa) outer CG
/// with conjugate-gradient inner solves; the inner solve is an exact DST
/// Poisson solve when the region is the full grid box.
DivSolveSolution min_energy_rightinverse(const CellMask& mask, const std::vector<char>& region,
                                         const ScalarField& rhs, const SolverParams& params);

/// Explicit Bogovskii construction on a star-shaped region: each face value is
/// the face-averaged kernel flux, so the discrete divergence identity holds up
/// to face-quadrature error. Reports ResidualTooLarge when that error exceeds
/// params.tol.
DivSolveSolution bogovskii_integral(const CellMask& mask, const std::vector<char>& region,
                                    const BaseDomain& base, const ScalarField& rhs,
                                    const SolverParams& params);

class PerforatedDomain;

/// Lemma-style local solves on E_n = B(x_n, delta2 eps) \ T_n and
/// F_n = B(x_n, delta0 eps^alpha) \ T_n, re-embedded by zero extension.
DivSolveSolution local_solve_E(const PerforatedDomain& dom, const CellMask& mask, int n,
                               const ScalarField& rhs, const SolverParams& params);
DivSolveSolution local_solve_F(const PerforatedDomain& dom, const CellMask& mask, int n,
                               const ScalarField& rhs, const SolverParams& params);

/// Per-solve diagnostics CSV line: `region,backend,q,residual,iterations,grad_norm`.
struct SolveDiag {
    std::string region;
    Backend backend;
    double q;
    double residual;
    int iterations;
    double grad_norm;
};
std::string diag_csv_header();
std::string diag_csv_row(const SolveDiag& d);

namespace detail {
/// Energy inner product used by the minimizer: all staggered quotients
/// incident to an active face, clamped faces contributing zero (trace term).
double solver_energy(const CellMask& mask, const std::vector<char>& region, const VectorField& u);
} // namespace detail

} // namespace divinv
