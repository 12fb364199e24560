#pragma once

#include "shapedis/common/rng.hpp"
#include "shapedis/geometry/types.hpp"

#include <vector>

namespace shapedis::geometry {

struct VolumeResult {
    double volume = 0.0;
    /// False when some edge is not shared by exactly two faces; the value is
    /// still returned but should be treated with care.
    bool closed = true;
};

/// Absolute signed-tetrahedron volume. Throws InputError on a mesh with no faces.
VolumeResult mesh_volume(const TriangleMesh& mesh);

/// Every undirected edge is used by exactly two faces.
bool is_closed(const TriangleMesh& mesh);

/// Area-weighted uniform samples on the surface. Throws InputError on zero area.
PointSet sample_surface(const TriangleMesh& mesh, std::size_t n, Rng& rng);

Vec3 surface_centroid(const TriangleMesh& mesh);

/// Brute-force signed distance to a closed mesh; the sign comes from the
/// generalized winding number (negative inside).
class MeshDistance {
public:
    explicit MeshDistance(const TriangleMesh& mesh);
    double signed_distance(const Vec3& p) const;

private:
    const TriangleMesh& mesh_;
};

struct NormalizationTransform {
    std::vector<Vec3> centers;  // per mesh
    double scale = 1.0;         // shared by the whole cohort
};

/// Centers each mesh at its surface centroid and applies one cohort-wide scale
/// so the farthest vertex lies at `radius`. A shared scale keeps relative
/// volumes intact.
NormalizationTransform normalize_cohort(std::vector<TriangleMesh>& meshes, double radius = 0.9);

void scale_mesh(TriangleMesh& mesh, double factor);

}  // namespace shapedis::geometry
