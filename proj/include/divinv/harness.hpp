#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "divinv/perforated.hpp"

namespace divinv {

/// Target law of the operator-norm sweep: e = ((3-q) alpha - 3)/q. A
/// nonnegative e means the bound is uniform in epsilon. Throws ExponentRange
/// for q outside (1,3) unless `strict` is false (exploratory mode).
double predicted_exponent(double q, double alpha, bool strict = true);

/// Radial C^2 bump (1 - s^2)^3 on [0,1) and its s-derivative; the rhs
/// families and several test oracles are built from it.
inline double radial_bump(double s) {
    if (s >= 1.0) return 0.0;
    double t = 1.0 - s * s;
    return t * t * t;
}
inline double radial_bump_ds(double s) {
    if (s >= 1.0) return 0.0;
    double t = 1.0 - s * s;
    return -6.0 * s * t * t;
}

enum class HoleLayout { SingleCentered, Lattice, Random };
enum class RhsFamily { BumpDx, HoleAdjacent };

struct SweepPlan {
    std::vector<double> epsilons; // decreasing
    std::vector<double> q_list;
    double alpha = 2.0;
    double delta0 = 1.0;
    double delta1 = 0.3;
    double delta2 = 0.45;
    BaseDomain base{};
    HoleShape shape{};
    HoleLayout layout = HoleLayout::SingleCentered;
    int lattice_m = 2;        // lattice rule: m^3 holes
    std::uint64_t seed = 0;   // random rule
    int random_count = 4;
    RhsFamily rhs = RhsFamily::BumpDx;
    int cells_per_hole = 3;   // k cells across the smallest hole diameter
    int resolution_cap = 96;  // plans needing more are rejected
    int resolution_min = 17;
    double tol = 1e-6;
    Backend backend = Backend::MinEnergy;
};

struct SweepRecord {
    double epsilon;
    double q;
    double alpha;
    int nx;
    double ratio;    // ||grad B_eps f||_{L^q} / ||f||_{L^q}
    double residual;
    double seconds;
};

/// Grid size for one sweep point (odd, so a centered hole lands on a cell
/// center). Throws UnderResolved when the cap is violated.
int plan_resolution(const SweepPlan& plan, double epsilon);

/// Geometry for one sweep point under the plan's layout rule.
PerforationConfig plan_config(const SweepPlan& plan, double epsilon);

/// The rhs family evaluated on the fluid cells, zero-mean, unit L^q norm.
ScalarField plan_rhs(const SweepPlan& plan, const PerforatedDomain& dom,
                     std::shared_ptr<const CellMask> mask, double q);

/// Validates every sweep point up front (geometry and resolution), then runs
/// one perforated solve per (epsilon, q). Records are sorted by (epsilon
/// descending, q ascending); `measure_time` off writes 0 seconds so output is
/// byte-stable.
std::vector<SweepRecord> run_sweep(const SweepPlan& plan, int threads = 1,
                                   bool measure_time = true);

std::string sweep_csv(const std::vector<SweepRecord>& records);
std::vector<SweepRecord> sweep_from_csv(const std::string& text);

struct FitResult {
    double slope;
    double intercept;
    double r_squared;
};

/// Least squares on (log eps, log ratio); needs >= 3 records.
FitResult fit_exponent(const std::vector<SweepRecord>& records);

struct BoundCheck {
    double constant;          // C calibrated at the largest epsilon
    std::vector<bool> pass;   // per record
    bool all_pass;
    bool uniform_rule;        // e >= 0: max/min < 2 instead
    double max_over_min;
};

/// ratio(eps) <= margin * C * (1 + eps^e) with C calibrated at the largest
/// epsilon; for e >= 0 the specialized uniformity rule max/min < 2 applies.
BoundCheck bound_check(const std::vector<SweepRecord>& records, double e, double margin = 3.0);

/// Best constant in ||u - <u>|| <= C ||grad u|| on the annulus D_n, computed
/// as 1/sqrt(lambda_2) of the Neumann Laplacian via inverse power iteration
/// on the mean-zero subspace. `resolution` counts cells across the control
/// ball diameter.
double poincare_constant(const PerforatedDomain& dom, int n, int resolution);

/// 1D sanity mode of the same solver on the unit interval (exact value 1/pi
/// in the continuum).
double poincare_constant_interval(int n);

} // namespace divinv
