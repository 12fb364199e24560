#pragma once

#include "shapedis/geometry/types.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace shapedis::geometry {

enum class ShapeKind { Sphere, Superellipsoid, LobedBlob };

std::string_view to_string(ShapeKind kind);
/// Accepts "sphere", "superellipsoid", "lobed-blob". Throws ConfigError otherwise.
ShapeKind parse_shape_kind(std::string_view name);

/// Parametric synthetic shape.
///
/// disease_severity shrinks the volume by up to kMaxVolumeShrink and carves one
/// localized dent; age_factor applies a volume-preserving elongation of up to
/// kMaxElongation along z. With both at zero the base shape is reproduced
/// exactly.
struct AnalyticShape {
    ShapeKind kind = ShapeKind::Sphere;
    double base_radius = 1.0;
    double disease_severity = 0.0;
    double age_factor = 0.0;
    /// Per-subject lobe jitter in [0, 1] (lobed blobs only), drawn from rng_seed.
    double anatomy = 0.0;
    /// Half-angle (radians) of the cone around +y holding the dent direction.
    double dent_jitter = 0.25;
    std::uint64_t rng_seed = 0;
};

inline constexpr double kMaxVolumeShrink = 0.30;
inline constexpr double kMaxElongation = 0.15;
inline constexpr double kMaxDentRadius = 0.35;  // in units of the base shape

/// Precomputed signed-distance evaluator for one AnalyticShape.
///
/// Returns the exact distance for undeformed spheres and a conservative
/// (1-Lipschitz) bound otherwise; the sign is always exact.
class AnalyticField {
public:
    explicit AnalyticField(const AnalyticShape& shape);

    double operator()(const Vec3& p) const;
    void evaluate(const PointSet& points, std::span<double> out) const;

    /// Radius of a ball around the origin guaranteed to contain the shape.
    double bounding_radius() const;

private:
    double base(const Vec3& u) const;
    double unit_base(const Vec3& u) const;

    AnalyticShape shape_;
    Vec3 inv_scale_;
    double distance_scale_ = 1.0;
    Vec3 dent_center_ = Vec3::Zero();
    double dent_radius_ = 0.0;
    std::array<std::array<double, 4>, 3> lobes_{};
};

double analytic_sdf_eval(const AnalyticShape& shape, const Vec3& p);

}  // namespace shapedis::geometry
