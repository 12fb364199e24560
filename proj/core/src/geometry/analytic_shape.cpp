#include "shapedis/geometry/analytic_shape.hpp"

#include "shapedis/common/error.hpp"
#include "shapedis/common/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace shapedis::geometry {
namespace {

constexpr double kSuperellipsoidExponent = 4.0;
constexpr double kLobeBlend = 0.15;
// Lobed blob: three overlapping lobes along z, roughly unit extent.
constexpr std::array<std::array<double, 4>, 3> kLobes{{
    {0.0, 0.0, -0.55, 0.42},
    {0.0, 0.0, 0.0, 0.55},
    {0.0, 0.08, 0.5, 0.45},
}};
// Per-subject lobe jitter at anatomy = 1.
constexpr double kLobeShift = 0.1;
constexpr double kLobeRadiusJitter = 0.08;

double smooth_min(double a, double b, double k) {
    const double h = std::clamp(0.5 + 0.5 * (b - a) / k, 0.0, 1.0);
    return b + (a - b) * h - k * h * (1.0 - h);
}

}  // namespace

double AnalyticField::unit_base(const Vec3& u) const {
    switch (shape_.kind) {
        case ShapeKind::Sphere:
            return u.norm() - 1.0;
        case ShapeKind::Superellipsoid: {
            const double e = kSuperellipsoidExponent;
            const double s = std::pow(std::abs(u.x()), e) + std::pow(std::abs(u.y()), e) +
                             std::pow(std::abs(u.z()), e);
            return std::pow(s, 1.0 / e) - 1.0;
        }
        case ShapeKind::LobedBlob: {
            double d = 0.0;
            for (std::size_t i = 0; i < lobes_.size(); ++i) {
                const auto& l = lobes_[i];
                const double di = (u - Vec3(l[0], l[1], l[2])).norm() - l[3];
                d = i == 0 ? di : smooth_min(d, di, kLobeBlend);
            }
            return d;
        }
    }
    return 0.0;
}

namespace {

// Dents are carved near +y, jittered per seed inside a cone of the given half-angle.
Vec3 dent_direction(std::uint64_t seed, double cone) {
    Rng rng(mix_seed(seed, 17));
    const double theta = cone * std::sqrt(rng.uniform());
    const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
    // Cone around +y.
    return Vec3(std::sin(theta) * std::cos(phi), std::cos(theta), std::sin(theta) * std::sin(phi));
}

}  // namespace

std::string_view to_string(ShapeKind kind) {
    switch (kind) {
        case ShapeKind::Sphere:
            return "sphere";
        case ShapeKind::Superellipsoid:
            return "superellipsoid";
        case ShapeKind::LobedBlob:
            return "lobed-blob";
    }
    return "sphere";
}

ShapeKind parse_shape_kind(std::string_view name) {
    if (name == "sphere") return ShapeKind::Sphere;
    if (name == "superellipsoid") return ShapeKind::Superellipsoid;
    if (name == "lobed-blob") return ShapeKind::LobedBlob;
    throw ConfigError("unknown shape kind: " + std::string(name));
}

AnalyticField::AnalyticField(const AnalyticShape& shape) : shape_(shape) {
    lobes_ = kLobes;
    if (shape.anatomy > 0.0) {
        Rng rng(mix_seed(shape.rng_seed, 29));
        for (auto& l : lobes_) {
            for (int a = 0; a < 3; ++a) l[static_cast<std::size_t>(a)] += kLobeShift * shape.anatomy * rng.uniform(-1.0, 1.0);
            l[3] *= 1.0 + kLobeRadiusJitter * shape.anatomy * rng.uniform(-1.0, 1.0);
        }
    }
    const double sev = std::clamp(shape.disease_severity, 0.0, 1.0);
    const double age = std::clamp(shape.age_factor, 0.0, 1.0);
    const double g = std::cbrt(1.0 - kMaxVolumeShrink * sev);
    const double a = 1.0 + kMaxElongation * age;
    const double lateral = 1.0 / std::sqrt(a);
    const Vec3 scale = shape.base_radius * g * Vec3(lateral, lateral, a);
    inv_scale_ = scale.cwiseInverse();
    distance_scale_ = scale.minCoeff();

    dent_radius_ = kMaxDentRadius * sev;
    if (dent_radius_ > 0.0) {
        // Surface point of the base shape along the dent direction.
        const Vec3 dir = dent_direction(shape.rng_seed, shape.dent_jitter);
        double lo = 0.0;
        double hi = 2.0;
        for (int i = 0; i < 60; ++i) {
            const double mid = 0.5 * (lo + hi);
            (unit_base(mid * dir) < 0.0 ? lo : hi) = mid;
        }
        dent_center_ = 0.5 * (lo + hi) * dir;
    }
}

double AnalyticField::base(const Vec3& u) const {
    const double b = unit_base(u);
    if (dent_radius_ <= 0.0) {
        return b;
    }
    return std::max(b, dent_radius_ - (u - dent_center_).norm());
}

double AnalyticField::operator()(const Vec3& p) const {
    return base(p.cwiseProduct(inv_scale_)) * distance_scale_;
}

void AnalyticField::evaluate(const PointSet& points, std::span<double> out) const {
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        out[static_cast<std::size_t>(i)] = (*this)(points.row(i).transpose());
    }
}

double AnalyticField::bounding_radius() const {
    // Unit-frame extents are at most ~1 for every kind; 1.05 leaves blending slack.
    return 1.05 / inv_scale_.minCoeff();
}

double analytic_sdf_eval(const AnalyticShape& shape, const Vec3& p) {
    return AnalyticField(shape)(p);
}

}  // namespace shapedis::geometry
