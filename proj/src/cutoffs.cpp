#include "divinv/cutoffs.hpp"

#include <algorithm>
#include <cmath>

#include "divinv/errors.hpp"

namespace divinv {

double smoothstep_quintic(double t) {
    if (t <= 0) return 0;
    if (t >= 1) return 1;
    return t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
}

double smoothstep_quintic_deriv(double t) {
    if (t <= 0 || t >= 1) return 0;
    double u = t * (1.0 - t);
    return 30.0 * u * u;
}

double BumpProfile::value(double r) const {
    if (r <= a) return 1.0;
    if (r >= b) return 0.0;
    return 1.0 - smoothstep_quintic((r - a) / (b - a));
}

double BumpProfile::deriv(double r) const {
    if (r <= a || r >= b) return 0.0;
    return -smoothstep_quintic_deriv((r - a) / (b - a)) / (b - a);
}

CutoffSet::CutoffSet(const PerforatedDomain& dom) : dom_(&dom) {
    const auto& cfg = dom.config();
    for (int n = 0; n < dom.hole_count(); ++n) {
        const auto& reg = dom.regions(n);
        chi_.push_back({reg.r_inner, reg.r_control});
        double rho = cfg.holes[n].shape.circumradius();
        if (rho > 0.9 * cfg.delta0)
            fail(ErrorKind::InclusionChainViolated,
                 "hole " + std::to_string(n) + ": circumradius " + std::to_string(rho) +
                     " > 0.9*delta0; phi would lose its transition width");
        phi_.push_back({rho * reg.scale, reg.r_cover});
    }
}

double CutoffSet::eval_chi(int n, const Vec3& p) const {
    return chi_[n].value(dist(p, dom_->regions(n).center));
}

double CutoffSet::eval_phi(int n, const Vec3& p) const {
    return phi_[n].value(dist(p, dom_->regions(n).center));
}

double CutoffSet::eval_g(const Vec3& p) const {
    double g = 1.0;
    for (int n = 0; n < dom_->hole_count(); ++n) {
        double d = dist(p, dom_->regions(n).center);
        if (d >= dom_->regions(n).r_cover) continue;
        g *= 1.0 - phi_[n].value(d);
    }
    return g;
}

double CutoffSet::eval_g_gradnorm(const Vec3& p) const {
    // cover balls sit in pairwise disjoint control volumes, so at most one
    // factor varies at p
    for (int n = 0; n < dom_->hole_count(); ++n) {
        double d = dist(p, dom_->regions(n).center);
        if (d < dom_->regions(n).r_cover) return std::abs(phi_[n].deriv(d));
    }
    return 0.0;
}

GradientCertificates certify_gradient_bounds(const CutoffSet& set) {
    const auto& dom = set.domain();
    const auto& cfg = dom.config();
    const int kSamples = 20000;

    double sup_chi = 0, sup_phi = 0;
    for (int n = 0; n < dom.hole_count(); ++n) {
        const BumpProfile& chi = set.chi_profile(n);
        const BumpProfile& phi = set.phi_profile(n);
        double schi = chi.slope_bound() * smoothstep_quintic_deriv(0.5) / 1.875;
        double sphi = phi.slope_bound() * smoothstep_quintic_deriv(0.5) / 1.875;
        for (int s = 0; s < kSamples; ++s) {
            double t = (s + 0.5) / kSamples;
            schi = std::max(schi, std::abs(chi.deriv(chi.a + t * (chi.b - chi.a))));
            sphi = std::max(sphi, std::abs(phi.deriv(phi.a + t * (phi.b - phi.a))));
        }
        sup_chi = std::max(sup_chi, schi);
        sup_phi = std::max(sup_phi, sphi);
    }
    double scale = std::pow(cfg.epsilon, cfg.alpha);
    GradientCertificates out{};
    out.chi_product = sup_chi * cfg.epsilon;
    out.phi_product = sup_phi * scale;
    out.g_product = sup_phi * scale; // sup |grad g| = max_n sup |phi_n'|
    out.samples = kSamples;
    return out;
}

GNormReport g_norm_check(const CutoffSet& set, double q, int cells_across_cover) {
    if (!(q >= 1.0)) fail(ErrorKind::BadExponent, "g_norm_check requires q >= 1");
    if (cells_across_cover < 3)
        fail(ErrorKind::UnderResolved, "g_norm_check needs >= 3 cells across the cover ball");

    const auto& dom = set.domain();
    const auto& cfg = dom.config();

    // supports are disjoint, so each hole's window integrates independently
    double sum_one = 0, sum_grad = 0;
    for (int n = 0; n < dom.hole_count(); ++n) {
        const auto& reg = dom.regions(n);
        int m = cells_across_cover;
        double h = 2.0 * reg.r_cover / m;
        for (int k = 0; k < m; ++k)
            for (int j = 0; j < m; ++j)
                for (int i = 0; i < m; ++i) {
                    Vec3 p{reg.center.x - reg.r_cover + (i + 0.5) * h,
                           reg.center.y - reg.r_cover + (j + 0.5) * h,
                           reg.center.z - reg.r_cover + (k + 0.5) * h};
                    double d = dist(p, reg.center);
                    double phi = set.phi_profile(n).value(d);
                    double dphi = std::abs(set.phi_profile(n).deriv(d));
                    double w = h * h * h;
                    sum_one += std::pow(phi, q) * w;
                    sum_grad += std::pow(dphi, q) * w;
                }
    }

    GNormReport rep{};
    rep.one_minus_g_lq = std::pow(sum_one, 1.0 / q);
    rep.grad_g_lq = std::pow(sum_grad, 1.0 / q);
    double e1 = 3.0 * (cfg.alpha - 1.0) / q;
    double e2 = e1 - cfg.alpha;
    rep.ratio_one_minus = rep.one_minus_g_lq / std::pow(cfg.epsilon, e1);
    rep.ratio_grad = rep.grad_g_lq / std::pow(cfg.epsilon, e2);
    return rep;
}

} // namespace divinv
