#pragma once

#include "shapedis/geometry/types.hpp"

#include <cstdint>
#include <vector>

namespace shapedis::geometry {

/// Static 3-D kd-tree for exact nearest-neighbor queries.
class KdTree {
public:
    explicit KdTree(const PointSet& points);

    /// Squared distance to the nearest stored point.
    double nearest_squared(const Vec3& q) const;
    Eigen::Index size() const { return points_.rows(); }

private:
    struct Node {
        int axis = -1;  // -1 marks a leaf
        double split = 0.0;
        int left = -1;
        int right = -1;
        int begin = 0;
        int end = 0;
    };

    int build(int begin, int end, int depth);
    void search(int node, const Vec3& q, double& best) const;

    PointSet points_;
    std::vector<int> order_;
    std::vector<Node> nodes_;
};

/// 0.5 * (mean_a min_b |a-b|^2 + mean_b min_a |b-a|^2). Throws InputError on empty input.
double chamfer_distance(const PointSet& a, const PointSet& b);

/// Chamfer over `n_points` area-weighted surface samples per side; both sides
/// are sampled with the same seed.
double chamfer_distance(const TriangleMesh& a, const TriangleMesh& b, std::size_t n_points = 30000,
                        std::uint64_t seed = 0);

}  // namespace shapedis::geometry
