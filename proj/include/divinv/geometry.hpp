#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "divinv/errors.hpp"

namespace divinv {

struct Vec3 {
    double x = 0, y = 0, z = 0;

    double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
    double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    double norm2() const { return dot(*this); }
    double norm() const { return std::sqrt(norm2()); }
};

inline double dist(const Vec3& a, const Vec3& b) { return (a - b).norm(); }

/// Bounded base domain, star-shaped with respect to an interior ball.
struct BaseDomain {
    enum class Kind { Ball, Box };
    Kind kind = Kind::Ball;
    Vec3 center{};
    double radius = 1.0;       // ball
    Vec3 half_extents{1, 1, 1}; // box
    Vec3 star_center{};
    double star_radius = 0.5;

    static BaseDomain ball(Vec3 c, double r, double star_r = 0.0);
    static BaseDomain box(Vec3 c, Vec3 half, double star_r = 0.0);

    double volume() const;
    bool contains(const Vec3& p) const;
    /// Signed distance to the boundary, positive inside.
    double boundary_distance(const Vec3& p) const;
    /// Axis-aligned bounding box [lo, hi].
    void bounding_box(Vec3& lo, Vec3& hi) const;
};

/// Unscaled hole shape; the realized hole is center + eps^alpha * shape.
/// Shapes are contained in the unit ball.
struct HoleShape {
    enum class Kind { Ball, Ellipsoid };
    Kind kind = Kind::Ball;
    Vec3 semi_axes{1, 1, 1}; // ellipsoid only

    double circumradius() const {
        if (kind == Kind::Ball) return 1.0;
        return std::max({semi_axes.x, semi_axes.y, semi_axes.z});
    }
    bool contains_unit(const Vec3& q) const {
        if (kind == Kind::Ball) return q.norm2() < 1.0;
        double sx = q.x / semi_axes.x, sy = q.y / semi_axes.y, sz = q.z / semi_axes.z;
        return sx * sx + sy * sy + sz * sz < 1.0;
    }
};

struct HoleSpec {
    Vec3 center{};
    HoleShape shape{};

    /// Point membership in the realized hole center + scale*shape.
    bool contains(const Vec3& p, double scale) const {
        Vec3 q = (p - center) * (1.0 / scale);
        return shape.contains_unit(q);
    }
};

struct PerforationConfig {
    double epsilon = 0.25;
    double alpha = 2.0;
    double delta0 = 1.0;
    double delta1 = 0.3;
    double delta2 = 0.45;
    BaseDomain base{};
    std::vector<HoleSpec> holes;

    double hole_scale() const { return std::pow(epsilon, alpha); }
};

/// Per-hole derived regions (all radii in absolute units).
struct HoleRegions {
    Vec3 center{};
    double r_inner = 0;   // delta1 * eps   (annulus D inner radius)
    double r_control = 0; // delta2 * eps   (control ball / annulus D outer)
    double r_cover = 0;   // delta0 * eps^alpha (region F outer radius)
    double scale = 0;     // eps^alpha
};

/// Validated perforated domain with derived annuli per hole.
class PerforatedDomain {
public:
    const PerforationConfig& config() const { return cfg_; }
    int hole_count() const { return static_cast<int>(cfg_.holes.size()); }
    int hole_count_bound() const { return bound_; }
    const HoleRegions& regions(int n) const { return regions_[n]; }
    const BaseDomain& base() const { return cfg_.base; }
    double min_center_gap() const { return min_gap_; }

    bool in_hole(int n, const Vec3& p) const {
        return cfg_.holes[n].contains(p, cfg_.hole_scale());
    }
    /// Hole index containing p, or -1.
    int hole_at(const Vec3& p) const;
    bool in_annulus_D(int n, const Vec3& p) const {
        double d = dist(p, regions_[n].center);
        return d > regions_[n].r_inner && d < regions_[n].r_control;
    }
    bool in_region_F(int n, const Vec3& p) const {
        double d = dist(p, regions_[n].center);
        return d < regions_[n].r_cover && !in_hole(n, p);
    }

    friend PerforatedDomain validate_config(const PerforationConfig& cfg);

private:
    PerforationConfig cfg_;
    std::vector<HoleRegions> regions_;
    int bound_ = 0;
    double min_gap_ = 0;
};

/// N(eps) upper bound: floor((3/(4*pi)) * |Omega| / eps^3).
long long hole_count_bound(double epsilon, const BaseDomain& base);

/// Checks every geometric hypothesis and attaches derived regions.
PerforatedDomain validate_config(const PerforationConfig& cfg);

struct RandomConfigParams {
    double epsilon = 0.25;
    double alpha = 2.0;
    double delta0 = 1.0;
    double delta1 = 0.3;
    double delta2 = 0.45;
    BaseDomain base{};
    HoleShape shape{};
    std::uint64_t seed = 0;
    int max_holes = 0;              // 0 = up to the count bound
    int max_consecutive_rejects = 500;
};

/// Greedy rejection-sampled packing; deterministic in the seed.
PerforationConfig generate_random_config(const RandomConfigParams& params);

enum class RegionTag : std::uint8_t { Outside = 0, Fluid = 1, Hole = 2 };

struct PointClass {
    RegionTag tag = RegionTag::Outside;
    int hole = -1;        // tag == Hole
    int annulus_D = -1;   // hole index whose annulus D contains the point, else -1
    int region_F = -1;    // hole index whose region F contains the point, else -1
};

PointClass classify_point(const PerforatedDomain& dom, const Vec3& p);

/// JSON round-trip for PerforationConfig (field names fixed by the file contract).
std::string config_to_json(const PerforationConfig& cfg);
PerforationConfig config_from_json(const std::string& text);
PerforationConfig config_from_file(const std::string& path);

} // namespace divinv
