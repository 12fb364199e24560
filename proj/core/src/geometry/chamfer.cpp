#include "shapedis/geometry/chamfer.hpp"

#include "shapedis/common/error.hpp"
#include "shapedis/common/rng.hpp"
#include "shapedis/geometry/mesh_ops.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace shapedis::geometry {
namespace {
constexpr int kLeafSize = 12;
}

KdTree::KdTree(const PointSet& points) : points_(points) {
    order_.resize(static_cast<std::size_t>(points_.rows()));
    std::iota(order_.begin(), order_.end(), 0);
    if (!order_.empty()) {
        nodes_.reserve(2 * order_.size() / kLeafSize + 2);
        build(0, static_cast<int>(order_.size()), 0);
    }
}

int KdTree::build(int begin, int end, int depth) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back({});
    if (end - begin <= kLeafSize) {
        nodes_[id].begin = begin;
        nodes_[id].end = end;
        return id;
    }
    // Split on the widest axis at the median.
    Eigen::RowVector3d lo = points_.row(order_[begin]), hi = lo;
    for (int i = begin + 1; i < end; ++i) {
        lo = lo.cwiseMin(points_.row(order_[i]));
        hi = hi.cwiseMax(points_.row(order_[i]));
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    const int mid = (begin + end) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](int a, int b) { return points_(a, axis) < points_(b, axis); });
    const double split = points_(order_[mid], axis);
    const int left = build(begin, mid, depth + 1);
    const int right = build(mid, end, depth + 1);
    nodes_[id].axis = axis;
    nodes_[id].split = split;
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
}

void KdTree::search(int node, const Vec3& q, double& best) const {
    const Node& n = nodes_[node];
    if (n.axis < 0) {
        for (int i = n.begin; i < n.end; ++i) {
            best = std::min(best, (points_.row(order_[i]).transpose() - q).squaredNorm());
        }
        return;
    }
    const double diff = q[n.axis] - n.split;
    const int near = diff < 0 ? n.left : n.right;
    const int far = diff < 0 ? n.right : n.left;
    search(near, q, best);
    if (diff * diff < best) search(far, q, best);
}

double KdTree::nearest_squared(const Vec3& q) const {
    double best = std::numeric_limits<double>::infinity();
    if (!nodes_.empty()) search(0, q, best);
    return best;
}

double chamfer_distance(const PointSet& a, const PointSet& b) {
    if (a.rows() == 0 || b.rows() == 0) {
        throw InputError("chamfer_distance: empty point set");
    }
    const auto one_sided = [](const PointSet& from, const KdTree& to) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < from.rows(); ++i) {
            s += to.nearest_squared(from.row(i).transpose());
        }
        return s / static_cast<double>(from.rows());
    };
    const KdTree ta(a), tb(b);
    return 0.5 * (one_sided(a, tb) + one_sided(b, ta));
}

double chamfer_distance(const TriangleMesh& a, const TriangleMesh& b, std::size_t n_points,
                        std::uint64_t seed) {
    if (a.empty() || b.empty()) {
        throw InputError("chamfer_distance: empty mesh");
    }
    Rng ra(seed), rb(seed);
    return chamfer_distance(sample_surface(a, n_points, ra), sample_surface(b, n_points, rb));
}

}  // namespace shapedis::geometry
