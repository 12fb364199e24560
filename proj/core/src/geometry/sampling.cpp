#include "shapedis/geometry/sampling.hpp"

#include "shapedis/common/error.hpp"
#include "shapedis/common/rng.hpp"
#include "shapedis/geometry/marching_cubes.hpp"
#include "shapedis/geometry/mesh_ops.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace shapedis::geometry {
namespace {

void check(const SamplingOptions& o) {
    if (o.count < 1) {
        throw InputError("sample_shape: count must be >= 1");
    }
    if (!(o.surface_fraction >= 0.0 && o.surface_fraction <= 1.0)) {
        throw InputError("sample_shape: surface_fraction must lie in [0, 1]");
    }
}

SampleSet draw(const TriangleMesh* surface, const std::function<double(const Vec3&)>& sdf,
               const SamplingOptions& o) {
    Rng rng(o.seed);
    const auto n = static_cast<Eigen::Index>(o.count);
    const auto n_surface = surface ? static_cast<Eigen::Index>(std::llround(o.surface_fraction * o.count)) : 0;
    const Eigen::Index n_small = n_surface / 2;

    SampleSet s;
    s.rows.resize(n, 4);
    PointSet on_surface;
    if (n_surface > 0) {
        on_surface = sample_surface(*surface, static_cast<std::size_t>(n_surface), rng);
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        Vec3 p;
        if (i < n_surface) {
            const double sigma = i < n_small ? o.noise_small : o.noise_large;
            p = on_surface.row(i).transpose() + Vec3(rng.normal(0, sigma), rng.normal(0, sigma), rng.normal(0, sigma));
            p = p.cwiseMax(-1.0).cwiseMin(1.0);
        } else {
            p = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
        }
        const Eigen::Vector3f pf = p.cast<float>();
        s.rows.row(i) << pf.x(), pf.y(), pf.z(), static_cast<float>(sdf(pf.cast<double>()));
    }
    return s;
}

}  // namespace

SampleSet sample_shape(const AnalyticShape& shape, const SamplingOptions& options) {
    check(options);
    const AnalyticField field(shape);
    const auto sdf = [&field](const Vec3& p) { return field(p); };
    TriangleMesh surface;
    if (options.surface_fraction > 0.0) {
        auto mo = MeshingOptions::for_metrics(options.surface_resolution);
        surface = extract_mesh(BatchField([&field](const PointSet& pts, std::span<double> out) {
                                   field.evaluate(pts, out);
                               }),
                               mo);
        if (surface.empty()) {
            throw InputError("sample_shape: analytic shape has no surface inside the unit box");
        }
    }
    return draw(options.surface_fraction > 0.0 ? &surface : nullptr, sdf, options);
}

SampleSet sample_shape(const TriangleMesh& mesh, const SamplingOptions& options) {
    check(options);
    if (mesh.empty()) {
        throw InputError("sample_shape: degenerate mesh with zero faces");
    }
    const MeshDistance dist(mesh);
    SampleSet s = draw(&mesh, [&dist](const Vec3& p) { return dist.signed_distance(p); }, options);
    s.shape_id = mesh.shape_id;
    return s;
}

}  // namespace shapedis::geometry
