#include "divinv/geometry.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include <json.hpp>

namespace divinv {

static constexpr double kPi = 3.14159265358979323846;

BaseDomain BaseDomain::ball(Vec3 c, double r, double star_r) {
    BaseDomain d;
    d.kind = Kind::Ball;
    d.center = c;
    d.radius = r;
    d.star_center = c;
    d.star_radius = star_r > 0 ? star_r : 0.5 * r;
    return d;
}

BaseDomain BaseDomain::box(Vec3 c, Vec3 half, double star_r) {
    BaseDomain d;
    d.kind = Kind::Box;
    d.center = c;
    d.half_extents = half;
    d.star_center = c;
    double hmin = std::min({half.x, half.y, half.z});
    d.star_radius = star_r > 0 ? star_r : 0.5 * hmin;
    return d;
}

double BaseDomain::volume() const {
    if (kind == Kind::Ball) return 4.0 / 3.0 * kPi * radius * radius * radius;
    return 8.0 * half_extents.x * half_extents.y * half_extents.z;
}

bool BaseDomain::contains(const Vec3& p) const {
    return boundary_distance(p) > 0.0;
}

double BaseDomain::boundary_distance(const Vec3& p) const {
    if (kind == Kind::Ball) return radius - dist(p, center);
    Vec3 q = p - center;
    double dx = half_extents.x - std::abs(q.x);
    double dy = half_extents.y - std::abs(q.y);
    double dz = half_extents.z - std::abs(q.z);
    return std::min({dx, dy, dz});
}

void BaseDomain::bounding_box(Vec3& lo, Vec3& hi) const {
    if (kind == Kind::Ball) {
        lo = center - Vec3{radius, radius, radius};
        hi = center + Vec3{radius, radius, radius};
    } else {
        lo = center - half_extents;
        hi = center + half_extents;
    }
}

long long hole_count_bound(double epsilon, const BaseDomain& base) {
    if (!(epsilon > 0)) fail(ErrorKind::BadDeltas, "epsilon must be positive");
    double v = 3.0 / (4.0 * kPi) * base.volume() / (epsilon * epsilon * epsilon);
    return static_cast<long long>(std::floor(v));
}

int PerforatedDomain::hole_at(const Vec3& p) const {
    for (int n = 0; n < hole_count(); ++n) {
        if (dist(p, regions_[n].center) <= regions_[n].r_cover && in_hole(n, p))
            return n;
    }
    return -1;
}

PerforatedDomain validate_config(const PerforationConfig& cfg) {
    if (!(cfg.delta1 < cfg.delta2))
        fail(ErrorKind::BadDeltas,
             "delta1 >= delta2 (" + std::to_string(cfg.delta1) + " >= " + std::to_string(cfg.delta2) + ")");
    if (!(cfg.epsilon > 0.0 && cfg.epsilon < 1.0))
        fail(ErrorKind::BadDeltas, "epsilon must lie in (0,1)");
    if (!(cfg.alpha >= 1.0))
        fail(ErrorKind::BadDeltas, "alpha must be >= 1");
    if (!(cfg.delta0 > 0.0 && cfg.delta1 > 0.0))
        fail(ErrorKind::BadDeltas, "deltas must be positive");

    const double scale = cfg.hole_scale();
    const double r_cover = cfg.delta0 * scale;
    const double r_inner = cfg.delta1 * cfg.epsilon;
    const double r_control = cfg.delta2 * cfg.epsilon;

    PerforatedDomain dom;
    dom.cfg_ = cfg;
    dom.bound_ = static_cast<int>(std::min<long long>(
        hole_count_bound(cfg.epsilon, cfg.base), std::numeric_limits<int>::max()));

    const int n_holes = static_cast<int>(cfg.holes.size());
    if (n_holes > dom.bound_)
        fail(ErrorKind::HoleCountExceeded,
             "N=" + std::to_string(n_holes) + " exceeds bound " + std::to_string(dom.bound_));

    for (int n = 0; n < n_holes; ++n) {
        const HoleSpec& hole = cfg.holes[n];
        double rho = hole.shape.circumradius();
        if (!(rho * scale <= r_cover))
            fail(ErrorKind::InclusionChainViolated,
                 "hole " + std::to_string(n) + ": T not inside B(x, delta0*eps^alpha)");
        if (!(r_cover <= r_inner))
            fail(ErrorKind::InclusionChainViolated,
                 "hole " + std::to_string(n) + ": delta0*eps^alpha > delta1*eps");
        if (!(cfg.base.boundary_distance(hole.center) > r_control))
            fail(ErrorKind::InclusionChainViolated,
                 "hole " + std::to_string(n) + ": control ball B(x, delta2*eps) not inside Omega");
        dom.regions_.push_back({hole.center, r_inner, r_control, r_cover, scale});
    }

    double min_gap = std::numeric_limits<double>::infinity();
    for (int m = 0; m < n_holes; ++m) {
        for (int n = m + 1; n < n_holes; ++n) {
            double g = dist(cfg.holes[m].center, cfg.holes[n].center);
            min_gap = std::min(min_gap, g);
            if (!(g > 2.0 * r_control))
                fail(ErrorKind::ControlVolumesOverlap,
                     "holes " + std::to_string(m) + "," + std::to_string(n) +
                         ": center distance " + std::to_string(g) + " <= 2*delta2*eps");
        }
    }
    dom.min_gap_ = min_gap;
    return dom;
}

// Portable uniform doubles from raw mt19937_64 output; std distributions are
// implementation-defined and would break the cross-platform determinism contract.
static double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

PerforationConfig generate_random_config(const RandomConfigParams& params) {
    const double scale = std::pow(params.epsilon, params.alpha);
    if (params.delta0 * scale > params.delta1 * params.epsilon)
        fail(ErrorKind::InfeasibleDeltas,
             "delta0*eps^alpha = " + std::to_string(params.delta0 * scale) +
                 " exceeds delta1*eps = " + std::to_string(params.delta1 * params.epsilon));
    if (!(params.delta1 < params.delta2))
        fail(ErrorKind::BadDeltas, "delta1 >= delta2");

    PerforationConfig cfg;
    cfg.epsilon = params.epsilon;
    cfg.alpha = params.alpha;
    cfg.delta0 = params.delta0;
    cfg.delta1 = params.delta1;
    cfg.delta2 = params.delta2;
    cfg.base = params.base;

    long long bound = hole_count_bound(params.epsilon, params.base);
    long long target = params.max_holes > 0 ? std::min<long long>(params.max_holes, bound) : bound;

    const double r_control = params.delta2 * params.epsilon;
    Vec3 lo, hi;
    params.base.bounding_box(lo, hi);

    std::mt19937_64 rng(params.seed);
    int rejects = 0;
    while (static_cast<long long>(cfg.holes.size()) < target &&
           rejects < params.max_consecutive_rejects) {
        Vec3 p{lo.x + (hi.x - lo.x) * uniform01(rng),
               lo.y + (hi.y - lo.y) * uniform01(rng),
               lo.z + (hi.z - lo.z) * uniform01(rng)};
        bool ok = params.base.boundary_distance(p) > r_control * (1.0 + 1e-9);
        if (ok) {
            for (const auto& h : cfg.holes) {
                if (dist(p, h.center) <= 2.0 * r_control * (1.0 + 1e-9)) {
                    ok = false;
                    break;
                }
            }
        }
        if (ok) {
            cfg.holes.push_back({p, params.shape});
            rejects = 0;
        } else {
            ++rejects;
        }
    }
    return cfg;
}

PointClass classify_point(const PerforatedDomain& dom, const Vec3& p) {
    PointClass out;
    if (!dom.base().contains(p)) {
        out.tag = RegionTag::Outside;
        return out;
    }
    out.tag = RegionTag::Fluid;
    for (int n = 0; n < dom.hole_count(); ++n) {
        const auto& reg = dom.regions(n);
        double d = dist(p, reg.center);
        if (d >= reg.r_control) continue;
        if (d <= reg.r_cover && dom.in_hole(n, p)) {
            out.tag = RegionTag::Hole;
            out.hole = n;
            return out;
        }
        if (d > reg.r_inner) out.annulus_D = n;
        if (d < reg.r_cover) out.region_F = n;
    }
    return out;
}

// ---------------------------------------------------------------------------
// JSON serialization

using nlohmann::json;

static json vec_to_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

static Vec3 vec_from_json(const json& j) {
    if (!j.is_array() || j.size() != 3) fail(ErrorKind::Io, "expected a 3-vector");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

std::string config_to_json(const PerforationConfig& cfg) {
    json j;
    j["epsilon"] = cfg.epsilon;
    j["alpha"] = cfg.alpha;
    j["delta0"] = cfg.delta0;
    j["delta1"] = cfg.delta1;
    j["delta2"] = cfg.delta2;
    json base;
    base["kind"] = cfg.base.kind == BaseDomain::Kind::Ball ? "ball" : "box";
    base["center"] = vec_to_json(cfg.base.center);
    if (cfg.base.kind == BaseDomain::Kind::Ball)
        base["radius"] = cfg.base.radius;
    else
        base["half_extents"] = vec_to_json(cfg.base.half_extents);
    base["star_center"] = vec_to_json(cfg.base.star_center);
    base["star_radius"] = cfg.base.star_radius;
    j["base"] = base;
    json holes = json::array();
    for (const auto& h : cfg.holes) {
        json hj;
        hj["center"] = vec_to_json(h.center);
        if (h.shape.kind == HoleShape::Kind::Ball) {
            hj["shape"] = {{"kind", "ball"}};
        } else {
            hj["shape"] = {{"kind", "ellipsoid"}, {"semi_axes", vec_to_json(h.shape.semi_axes)}};
        }
        holes.push_back(hj);
    }
    j["holes"] = holes;
    return j.dump(2);
}

PerforationConfig config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const std::exception& e) {
        fail(ErrorKind::Io, std::string("JSON parse error: ") + e.what());
    }
    try {
        PerforationConfig cfg;
        cfg.epsilon = j.at("epsilon").get<double>();
        cfg.alpha = j.at("alpha").get<double>();
        cfg.delta0 = j.at("delta0").get<double>();
        cfg.delta1 = j.at("delta1").get<double>();
        cfg.delta2 = j.at("delta2").get<double>();
        const json& base = j.at("base");
        std::string kind = base.at("kind").get<std::string>();
        Vec3 center = vec_from_json(base.at("center"));
        if (kind == "ball") {
            cfg.base = BaseDomain::ball(center, base.at("radius").get<double>(),
                                        base.value("star_radius", 0.0));
        } else if (kind == "box") {
            cfg.base = BaseDomain::box(center, vec_from_json(base.at("half_extents")),
                                       base.value("star_radius", 0.0));
        } else {
            fail(ErrorKind::Io, "base.kind must be 'ball' or 'box'");
        }
        if (base.contains("star_center")) cfg.base.star_center = vec_from_json(base["star_center"]);
        for (const auto& hj : j.at("holes")) {
            HoleSpec h;
            h.center = vec_from_json(hj.at("center"));
            if (hj.contains("shape")) {
                const json& s = hj["shape"];
                std::string sk = s.value("kind", "ball");
                if (sk == "ball") {
                    h.shape.kind = HoleShape::Kind::Ball;
                } else if (sk == "ellipsoid") {
                    h.shape.kind = HoleShape::Kind::Ellipsoid;
                    h.shape.semi_axes = vec_from_json(s.at("semi_axes"));
                } else {
                    fail(ErrorKind::Io, "shape.kind must be 'ball' or 'ellipsoid'");
                }
            }
            cfg.holes.push_back(h);
        }
        return cfg;
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        fail(ErrorKind::Io, std::string("config schema error: ") + e.what());
    }
}

PerforationConfig config_from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Io, "cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return config_from_json(ss.str());
}

} // namespace divinv
