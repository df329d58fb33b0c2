#pragma once

#include <string>
#include <vector>

namespace divinv {
namespace ledger {

/// Pressure-law parameters and their derived exponents. The scalar
/// `delta0_exp` is the small perturbation exponent of the a priori estimates;
/// it is deliberately named apart from the geometric delta0.
struct HomogParams {
    double gamma;
    double alpha;
    double delta0_exp = 0.0;

    double beta_gamma() const { return 3.0 * (gamma - 1.0); }
    double q_star() const { return (3.0 * gamma - 3.0) / (2.0 * gamma - 3.0); }
    bool alpha_in_theorem_range() const { return alpha > 3.0; }
};

struct LedgerResult {
    std::string name;
    double value;
    double identity_residual; // |lhs - rhs| of the defining identity
    bool admissible;          // where applicable
};

/// Smallness condition alpha*(gamma-2)/(2*gamma-3) > 1, evaluated in both
/// algebraic forms (the second is alpha*gamma - 2*alpha - 2*gamma + 3 > 0);
/// they must agree. gamma must exceed 2.
bool admissible(double gamma, double alpha);

/// sigma1 = ((3 - qs) alpha - 3)/qs with qs = (3g-3)/(2g-3); equals
/// ((2g-3)/(g-1)) ((g-2)/(2g-3) alpha - 1). Both forms evaluated; positive
/// exactly when admissible.
LedgerResult sigma1(double gamma, double alpha);

/// theta solving 1/target = (1-theta)/p0 + theta/p1, with target strictly
/// between p0 and p1.
double interpolation_theta(double target_p, double p0, double p1);

/// theta4 = (g-1)/(2(3g-4)) from 5/6 = (1-theta4) + theta4/(3g-3), and the
/// positivity g-1-2*theta4 = (g-1)(3g-5)/(3g-4) > 0.
LedgerResult theta4_identities(double gamma);

struct RateResult {
    double r1;
    double h;           // h(delta0_exp)
    double delta1_rate; // min{3(alpha-1)/r1, h}
    double h0_residual; // |h(0) - (a g - 2a - 2g + 3)/(g-1)|
};

/// 1/r1 + (qs + d0)^{-1} = 1/qs; h(d0) = 3(alpha-1)/(qs + d0) - alpha;
/// rate = min{3(alpha-1)/r1, h}. Errors: NotAdmissible, Delta0TooLarge
/// (h <= 0 or r1 degenerate, including d0 = 0).
RateResult r1_and_rate(double gamma, double alpha, double delta0_exp);

struct GeExponents {
    double e_one_minus_g; // 3(alpha-1)/q
    double e_grad_g;      // 3(alpha-1)/q - alpha
};
GeExponents ge_exponents(double q, double alpha);

/// Margin (3g-3) - max{theta1*g + theta2*(2g-3), 2g-2, (3g-3) - (g-1)(3g-5)/(3g-4)};
/// positive for every gamma in (2,3].
double beta1_margin(double gamma);

/// Full evaluation for the CLI: one row per identity.
std::vector<LedgerResult> evaluate(const HomogParams& p);

/// Admissibility map over a (gamma, alpha) rectangle, CSV `gamma,alpha,admissible,sigma1`.
std::string scan_csv(double gamma_lo, double gamma_hi, int gamma_n, double alpha_lo,
                     double alpha_hi, int alpha_n);

} // namespace ledger
} // namespace divinv
