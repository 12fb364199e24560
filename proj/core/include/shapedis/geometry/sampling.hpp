#pragma once

#include "shapedis/geometry/analytic_shape.hpp"
#include "shapedis/geometry/types.hpp"

#include <cstdint>
#include <string>

namespace shapedis::geometry {

/// SDF training samples for one shape: rows of (x, y, z, s) in float32.
struct SampleSet {
    std::string shape_id;
    Eigen::Matrix<float, Eigen::Dynamic, 4, Eigen::RowMajor> rows;

    Eigen::Index size() const { return rows.rows(); }
};

struct SamplingOptions {
    std::size_t count = 16384;
    double surface_fraction = 0.95;
    double noise_small = 0.005;
    double noise_large = 0.05;
    int surface_resolution = 96;  // marching-cubes grid used to seed surface points
    std::uint64_t seed = 0;
};

/// Surface-biased sampling. The first round(count*surface_fraction) rows are
/// surface points perturbed by N(0, noise_small^2) (first half) and
/// N(0, noise_large^2) (second half); the rest are uniform in [-1,1]^3.
/// Points are clamped to the box before the field is evaluated.
SampleSet sample_shape(const AnalyticShape& shape, const SamplingOptions& options);

/// Import path: same layout with signed point-to-mesh distances.
/// Throws InputError on a mesh with no faces.
SampleSet sample_shape(const TriangleMesh& mesh, const SamplingOptions& options);

}  // namespace shapedis::geometry
