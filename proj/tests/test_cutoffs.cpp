#include <doctest.h>

#include <cmath>

#include "divinv/cutoffs.hpp"

using namespace divinv;

namespace {

PerforationConfig config_with(double eps, double alpha, double d0, double d1, double d2,
                              double semi = 0.8) {
    PerforationConfig cfg;
    cfg.epsilon = eps;
    cfg.alpha = alpha;
    cfg.delta0 = d0;
    cfg.delta1 = d1;
    cfg.delta2 = d2;
    cfg.base = BaseDomain::ball({0, 0, 0}, 1.0);
    HoleSpec h;
    h.shape.kind = HoleShape::Kind::Ellipsoid;
    h.shape.semi_axes = {semi, semi, semi};
    cfg.holes.push_back(h);
    return cfg;
}

} // namespace

TEST_CASE("quintic smoothstep peak slope is exactly 15/8") {
    CHECK(smoothstep_quintic(0.0) == 0.0);
    CHECK(smoothstep_quintic(1.0) == 1.0);
    CHECK(smoothstep_quintic_deriv(0.5) == doctest::Approx(1.875).epsilon(1e-15));
    double sup = 0;
    for (int i = 0; i <= 100000; ++i)
        sup = std::max(sup, smoothstep_quintic_deriv(i / 100000.0));
    CHECK(sup == doctest::Approx(1.875).epsilon(1e-12));
}

TEST_CASE("bump profile plateau and support are exact") {
    BumpProfile p{0.3, 0.45};
    CHECK(p.value(0.0) == 1.0);
    CHECK(p.value(0.3) == 1.0);
    CHECK(p.value(0.45) == 0.0);
    CHECK(p.value(0.6) == 0.0);
    for (int i = 0; i < 50; ++i) {
        double r = 0.3 + 0.15 * (i + 0.5) / 50;
        CHECK(p.value(r) >= 0.0);
        CHECK(p.value(r) <= 1.0);
        if (i > 0) {
            double prev = p.value(0.3 + 0.15 * (i - 0.5) / 50);
            CHECK(p.value(r) <= prev + 1e-15); // monotone nonincreasing
        }
    }
    CHECK(p.slope_bound() == doctest::Approx(1.875 / 0.15).epsilon(1e-15));
}

TEST_CASE("chi, phi plateau and support values") {
    PerforatedDomain dom = validate_config(config_with(0.25, 2.0, 1.0, 0.3, 0.45));
    CutoffSet set(dom);
    // chi: 1 at the center and on B(x, delta1 eps); 0 at distance delta2 eps
    CHECK(set.eval_chi(0, {0, 0, 0}) == 1.0);
    CHECK(set.eval_chi(0, {0.075, 0, 0}) == 1.0);
    CHECK(set.eval_chi(0, {0.1125, 0, 0}) == 0.0);
    CHECK(set.eval_chi(0, {0.2, 0, 0}) == 0.0);
    // phi: 1 on the hole (20 sample points), 0 outside B(x, delta0 eps^alpha)
    for (int s = 0; s < 20; ++s) {
        double t = s / 20.0;
        Vec3 p{0.8 * 0.0625 * t * std::cos(2.1 * s), 0.8 * 0.0625 * t * std::sin(2.1 * s), 0.0};
        CHECK(set.eval_phi(0, p) == 1.0);
    }
    CHECK(set.eval_phi(0, {0.0625, 0, 0}) == 0.0);
    // g = 1 - phi for a single hole
    CHECK(set.eval_g({0, 0, 0}) == 0.0);
    CHECK(set.eval_g({0.5, 0.5, 0.5}) == 1.0);
    // grad g vanishes outside the transition shell (20 samples)
    for (int s = 0; s < 20; ++s) {
        Vec3 p{0.07 + 0.01 * s, 0.05, -0.02};
        CHECK(set.eval_g_gradnorm(p) == 0.0);
    }
}

TEST_CASE("phi requires a transition width") {
    PerforationConfig cfg = config_with(0.25, 2.0, 1.0, 0.3, 0.45, 0.95);
    PerforatedDomain dom = validate_config(cfg); // geometry is fine
    try {
        CutoffSet set(dom);
        FAIL("expected the 0.9*delta0 guard");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::InclusionChainViolated);
    }
}

TEST_CASE("gradient certificates match the analytic slope") {
    // chi with delta1=0.3, delta2=0.45 at eps=0.25: sup|grad chi| = 1.875/0.0375 = 50
    PerforatedDomain dom = validate_config(config_with(0.25, 2.0, 1.0, 0.3, 0.45));
    CutoffSet set(dom);
    GradientCertificates cert = certify_gradient_bounds(set);
    CHECK(cert.samples >= 10000);
    CHECK(cert.chi_product == doctest::Approx(1.875 / 0.15).epsilon(1e-12)); // = 12.5
    // phi with rho=0.8, delta0=1: eps^alpha * sup|grad phi| = 1.875/0.2 = 9.375
    CHECK(cert.phi_product == doctest::Approx(9.375).epsilon(1e-12));
    CHECK(cert.g_product == doctest::Approx(9.375).epsilon(1e-12));
}

TEST_CASE("certificate products are eps-invariant") {
    double ref_chi = 0, ref_phi = 0;
    bool first = true;
    for (double eps : {0.4, 0.2, 0.1, 0.05}) {
        PerforatedDomain dom = validate_config(config_with(eps, 2.0, 1.0, 0.3, 0.45));
        CutoffSet set(dom);
        GradientCertificates cert = certify_gradient_bounds(set);
        if (first) {
            ref_chi = cert.chi_product;
            ref_phi = cert.phi_product;
            first = false;
        } else {
            CHECK(std::abs(cert.chi_product - ref_chi) <= 1e-12 * ref_chi);
            CHECK(std::abs(cert.phi_product - ref_phi) <= 1e-12 * ref_phi);
        }
    }
}

TEST_CASE("g_norm_check: no holes means zero norms") {
    PerforationConfig cfg = config_with(0.25, 2.0, 1.0, 0.3, 0.45);
    cfg.holes.clear();
    PerforatedDomain dom = validate_config(cfg);
    CutoffSet set(dom);
    GNormReport rep = g_norm_check(set, 2.0);
    CHECK(rep.one_minus_g_lq == 0.0);
    CHECK(rep.grad_g_lq == 0.0);
}

TEST_CASE("g_norm_check scales exactly with the hole scale") {
    // single hole, q=2, alpha=2: halving eps scales ||1-g|| by 2^{-3 alpha/q} = 1/8
    GNormReport r1, r2;
    {
        CutoffSet set(validate_config(config_with(0.2, 2.0, 1.0, 0.3, 0.45)));
        r1 = g_norm_check(set, 2.0);
    }
    {
        CutoffSet set(validate_config(config_with(0.1, 2.0, 1.0, 0.3, 0.45)));
        r2 = g_norm_check(set, 2.0);
    }
    CHECK(r2.one_minus_g_lq / r1.one_minus_g_lq == doctest::Approx(1.0 / 8).epsilon(1e-10));
    // the reported ratios against eps^{3(alpha-1)/q} and eps^{...-alpha} stay put
    CHECK(r2.ratio_one_minus == doctest::Approx(r1.ratio_one_minus).epsilon(1e-10));
    CHECK(r2.ratio_grad == doctest::Approx(r1.ratio_grad).epsilon(1e-10));
}

TEST_CASE("g_norm_check against the volume-count oracle at q=1") {
    // ||1-g||_L1 <= N * (4 pi/3) (delta0 eps^alpha)^3; equality would need phi == 1
    PerforationConfig cfg = config_with(0.25, 2.0, 1.0, 0.3, 0.45);
    cfg.holes.push_back({{0.4, 0, 0}, cfg.holes[0].shape});
    cfg.holes.push_back({{-0.2, 0.35, 0.1}, cfg.holes[0].shape});
    CutoffSet set(validate_config(cfg));
    GNormReport rep = g_norm_check(set, 1.0);
    double cover = 0.0625;
    double ball = 4.0 * 3.14159265358979323846 / 3.0 * cover * cover * cover;
    CHECK(rep.one_minus_g_lq <= 3.0 * ball * (1 + 1e-9));
    CHECK(rep.one_minus_g_lq > 0.3 * 3.0 * ball); // plateau fills most of the ball
    try {
        g_norm_check(set, 2.0, 2);
        FAIL("expected UnderResolved");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::UnderResolved);
    }
}
