#include "divinv/ledger.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "divinv/errors.hpp"
#include "divinv/fields.hpp"

namespace divinv {
namespace ledger {

static void require_gamma(double gamma) {
    if (!(gamma > 2.0))
        fail(ErrorKind::GammaRange, "gamma must exceed 2 (got " + std::to_string(gamma) + ")");
}

bool admissible(double gamma, double alpha) {
    require_gamma(gamma);
    bool form1 = alpha * (gamma - 2.0) / (2.0 * gamma - 3.0) > 1.0;
    bool form2 = alpha * gamma - 2.0 * alpha - 2.0 * gamma + 3.0 > 0.0;
    if (form1 != form2)
        fail(ErrorKind::GammaRange, "admissibility forms disagree (boundary round-off)");
    return form1;
}

LedgerResult sigma1(double gamma, double alpha) {
    require_gamma(gamma);
    double qs = (3.0 * gamma - 3.0) / (2.0 * gamma - 3.0);
    double form1 = ((3.0 - qs) * alpha - 3.0) / qs;
    double form2 =
        (2.0 * gamma - 3.0) / (gamma - 1.0) * ((gamma - 2.0) / (2.0 * gamma - 3.0) * alpha - 1.0);
    LedgerResult r;
    r.name = "sigma1";
    r.value = form1;
    r.identity_residual = std::abs(form1 - form2);
    r.admissible = form1 > 0.0;
    return r;
}

double interpolation_theta(double target_p, double p0, double p1) {
    double lo = std::min(p0, p1), hi = std::max(p0, p1);
    if (!(target_p > lo && target_p < hi) && target_p != p0) {
        if (target_p == p0) return 0.0;
        fail(ErrorKind::NotBetween, "interpolation target " + std::to_string(target_p) +
                                        " not between " + std::to_string(p0) + " and " +
                                        std::to_string(p1));
    }
    return (1.0 / p0 - 1.0 / target_p) / (1.0 / p0 - 1.0 / p1);
}

LedgerResult theta4_identities(double gamma) {
    require_gamma(gamma);
    if (!(gamma <= 3.0))
        fail(ErrorKind::GammaRange, "theta4 identities need gamma in (2,3]");
    double closed = (gamma - 1.0) / (2.0 * (3.0 * gamma - 4.0));
    double from_relation = interpolation_theta(6.0 / 5.0, 1.0, 3.0 * gamma - 3.0);
    double positivity = (gamma - 1.0) * (3.0 * gamma - 5.0) / (3.0 * gamma - 4.0);
    LedgerResult r;
    r.name = "theta4";
    r.value = closed;
    r.identity_residual = std::abs(closed - from_relation);
    r.admissible = positivity > 0.0 &&
                   std::abs((gamma - 1.0 - 2.0 * closed) - positivity) <= 1e-12;
    return r;
}

RateResult r1_and_rate(double gamma, double alpha, double delta0_exp) {
    if (!admissible(gamma, alpha))
        fail(ErrorKind::NotAdmissible, "alpha*(gamma-2)/(2*gamma-3) <= 1");
    double qs = (3.0 * gamma - 3.0) / (2.0 * gamma - 3.0);
    double inv_r1 = 1.0 / qs - 1.0 / (qs + delta0_exp);
    if (!(inv_r1 > 0.0))
        fail(ErrorKind::Delta0TooLarge,
             "delta0_exp = " + std::to_string(delta0_exp) +
                 " gives a degenerate r1 (the perturbation must be positive)");
    RateResult out;
    out.r1 = 1.0 / inv_r1;
    out.h = 3.0 * (alpha - 1.0) / (qs + delta0_exp) - alpha;
    if (!(out.h > 0.0))
        fail(ErrorKind::Delta0TooLarge,
             "h(delta0_exp) = " + std::to_string(out.h) + " <= 0; shrink delta0_exp");
    if (!(out.r1 > 1.0))
        fail(ErrorKind::Delta0TooLarge, "r1 <= 1");
    out.delta1_rate = std::min(3.0 * (alpha - 1.0) / out.r1, out.h);
    double h0 = 3.0 * (alpha - 1.0) / qs - alpha;
    double closed = (alpha * gamma - 2.0 * alpha - 2.0 * gamma + 3.0) / (gamma - 1.0);
    out.h0_residual = std::abs(h0 - closed);
    return out;
}

GeExponents ge_exponents(double q, double alpha) {
    if (!(q >= 1.0)) fail(ErrorKind::BadExponent, "ge_exponents requires q >= 1");
    GeExponents e;
    e.e_one_minus_g = 3.0 * (alpha - 1.0) / q;
    e.e_grad_g = e.e_one_minus_g - alpha;
    return e;
}

double beta1_margin(double gamma) {
    require_gamma(gamma);
    if (!(gamma <= 3.0)) fail(ErrorKind::GammaRange, "beta1 margin needs gamma in (2,3]");
    double p1 = 3.0 * gamma - 3.0;
    double th1 = interpolation_theta(gamma, 1.0, p1);
    double th2 = interpolation_theta(2.0 * gamma - 3.0, 1.0, p1);
    double e1 = th1 * gamma + th2 * (2.0 * gamma - 3.0);
    double e2 = 2.0 * gamma - 2.0;
    double e3 = p1 - (gamma - 1.0) * (3.0 * gamma - 5.0) / (3.0 * gamma - 4.0);
    return p1 - std::max({e1, e2, e3});
}

std::vector<LedgerResult> evaluate(const HomogParams& p) {
    std::vector<LedgerResult> rows;
    bool adm = admissible(p.gamma, p.alpha);
    rows.push_back({"admissible", adm ? 1.0 : 0.0, 0.0, adm});
    rows.push_back({"beta_gamma", p.beta_gamma(), 0.0, p.beta_gamma() > 3.0});
    rows.push_back({"q_star", p.q_star(), 0.0, p.q_star() >= 2.0 && p.q_star() < 3.0});
    rows.push_back(sigma1(p.gamma, p.alpha));
    if (p.gamma <= 3.0) {
        double p1 = 3.0 * p.gamma - 3.0;
        double th1 = interpolation_theta(p.gamma, 1.0, p1);
        double th2 = interpolation_theta(2.0 * p.gamma - 3.0, 1.0, p1);
        double th3 = interpolation_theta(6.0 / 5.0, 1.0, p1);
        auto resid = [&](double th, double target) {
            return std::abs((1.0 - th) + th / p1 - 1.0 / target);
        };
        rows.push_back({"theta1", th1, resid(th1, p.gamma), th1 > 0 && th1 < 1});
        rows.push_back({"theta2", th2, resid(th2, 2.0 * p.gamma - 3.0), th2 > 0 && th2 < 1});
        rows.push_back({"theta3", th3, resid(th3, 6.0 / 5.0), th3 > 0 && th3 < 1});
        rows.push_back(theta4_identities(p.gamma));
        double margin = beta1_margin(p.gamma);
        rows.push_back({"beta1_margin", margin, 0.0, margin > 0.0});
    }
    GeExponents ge = ge_exponents(p.q_star(), p.alpha);
    rows.push_back({"ge_exponent_one_minus_g", ge.e_one_minus_g, 0.0, true});
    rows.push_back({"ge_exponent_grad_g", ge.e_grad_g, 0.0, ge.e_grad_g > 0.0});
    if (adm && p.delta0_exp > 0.0) {
        RateResult rr = r1_and_rate(p.gamma, p.alpha, p.delta0_exp);
        rows.push_back({"r1", rr.r1, 0.0, rr.r1 > 1.0});
        rows.push_back({"h_delta0", rr.h, rr.h0_residual, rr.h > 0.0});
        rows.push_back({"delta1_rate", rr.delta1_rate, 0.0, rr.delta1_rate > 0.0});
    }
    return rows;
}

std::string scan_csv(double gamma_lo, double gamma_hi, int gamma_n, double alpha_lo,
                     double alpha_hi, int alpha_n) {
    std::string out = "gamma,alpha,admissible,sigma1\n";
    for (int i = 0; i < gamma_n; ++i) {
        double g = gamma_lo + (gamma_hi - gamma_lo) * (i + 0.5) / gamma_n;
        for (int j = 0; j < alpha_n; ++j) {
            double a = alpha_lo + (alpha_hi - alpha_lo) * (j + 0.5) / alpha_n;
            bool adm = admissible(g, a);
            double s = sigma1(g, a).value;
            out += format_double(g) + "," + format_double(a) + "," + (adm ? "1" : "0") + "," +
                   format_double(s) + "\n";
        }
    }
    return out;
}

} // namespace ledger
} // namespace divinv
