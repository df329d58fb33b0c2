#pragma once

#include <vector>

#include "divinv/geometry.hpp"

namespace divinv {

/// Quintic smoothstep s(t) = 6t^5 - 15t^4 + 10t^3 on [0,1]; C^2 at both ends,
/// peak slope exactly 15/8.
double smoothstep_quintic(double t);
double smoothstep_quintic_deriv(double t);

/// Radial bump: 1 on [0,a], 0 on [b,inf), monotone quintic transition in (a,b).
struct BumpProfile {
    double a = 0;
    double b = 1;

    double value(double r) const;
    /// d/dr of the profile (non-positive).
    double deriv(double r) const;
    /// sup_r |profile'| = 1.875 / (b - a), exact.
    double slope_bound() const { return 1.875 / (b - a); }
};

/// The per-hole cutoffs chi (control-ball scale) and phi (hole scale), plus the
/// global field g = prod_n (1 - phi_n).
class CutoffSet {
public:
    /// Requires circumradius(T_n) <= 0.9 * delta0 for every hole, so phi keeps
    /// a positive transition width.
    explicit CutoffSet(const PerforatedDomain& dom);

    const PerforatedDomain& domain() const { return *dom_; }
    const BumpProfile& chi_profile(int n) const { return chi_[n]; }
    const BumpProfile& phi_profile(int n) const { return phi_[n]; }

    double eval_chi(int n, const Vec3& p) const;
    double eval_phi(int n, const Vec3& p) const;
    double eval_g(const Vec3& p) const;
    /// |grad g| at p (analytic; supports of the per-hole factors are disjoint).
    double eval_g_gradnorm(const Vec3& p) const;

private:
    const PerforatedDomain* dom_;
    std::vector<BumpProfile> chi_;
    std::vector<BumpProfile> phi_;
};

struct GradientCertificates {
    double chi_product;   // eps * sup |grad chi|
    double phi_product;   // eps^alpha * sup |grad phi|
    double g_product;     // eps^alpha * sup |grad g|
    int samples;          // 1D samples used to confirm the analytic bound
};

/// Products are eps-independent by construction; confirmed by dense sampling
/// of the profiles (>= 10^4 points) against the analytic peak slope.
GradientCertificates certify_gradient_bounds(const CutoffSet& set);

struct GNormReport {
    double one_minus_g_lq;   // ||1 - g||_{L^q}
    double grad_g_lq;        // ||grad g||_{L^q}
    double ratio_one_minus;  // ||1-g|| / eps^{3(alpha-1)/q}
    double ratio_grad;       // ||grad g|| / eps^{3(alpha-1)/q - alpha}
};

/// Quadrature of the analytic profiles on per-hole windows resolving the hole
/// scale. Requires >= 3 cells across each cover ball (else UnderResolved).
/// q >= 1 is allowed here.
GNormReport g_norm_check(const CutoffSet& set, double q, int cells_across_cover = 24);

} // namespace divinv
