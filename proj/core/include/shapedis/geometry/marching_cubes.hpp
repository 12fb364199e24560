#pragma once

#include "shapedis/geometry/types.hpp"

#include <functional>
#include <span>

namespace shapedis::geometry {

/// Fills `out[i]` with the field value at row i of `points`.
using BatchField = std::function<void(const PointSet& points, std::span<double> out)>;
using ScalarField = std::function<double(const Vec3& p)>;

struct MeshingOptions {
    int resolution = 64;  // grid points per axis
    double iso = 0.0;
    double bound = 1.0;  // grid spans [-bound, bound]^3
    int smoothing_iterations = 5;
    double smoothing_lambda = 0.5;
    std::size_t chunk = 65536;  // points per field call

    /// Preset for metric computations: no smoothing.
    static MeshingOptions for_metrics(int resolution) {
        MeshingOptions o;
        o.resolution = resolution;
        o.smoothing_iterations = 0;
        return o;
    }
};

/// Marching cubes over a regular grid. Vertices on shared cell edges are
/// welded, faces are oriented outward (field negative inside). A field with
/// no crossing yields an empty mesh.
TriangleMesh extract_mesh(const BatchField& field, const MeshingOptions& options);
TriangleMesh extract_mesh(const ScalarField& field, const MeshingOptions& options);

/// Uniform Laplacian smoothing: v += lambda * (mean(neighbors) - v).
void laplacian_smooth(TriangleMesh& mesh, int iterations, double lambda);

}  // namespace shapedis::geometry
