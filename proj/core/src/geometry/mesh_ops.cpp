#include "shapedis/geometry/mesh_ops.hpp"

#include "shapedis/common/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <utility>

namespace shapedis::geometry {
namespace {

Vec3 vertex(const TriangleMesh& m, Eigen::Index f, int k) {
    return m.vertices.row(m.faces(f, k)).transpose();
}

// Closest point on triangle abc to p (Ericson, Real-Time Collision Detection 5.1.5).
Vec3 closest_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    const Vec3 ab = b - a, ac = c - a, ap = p - a;
    const double d1 = ab.dot(ap), d2 = ac.dot(ap);
    if (d1 <= 0 && d2 <= 0) return a;
    const Vec3 bp = p - b;
    const double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0 && d4 <= d3) return b;
    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0 && d1 >= 0 && d3 <= 0) return a + (d1 / (d1 - d3)) * ab;
    const Vec3 cp = p - c;
    const double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0 && d5 <= d6) return c;
    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0 && d2 >= 0 && d6 <= 0) return a + (d2 / (d2 - d6)) * ac;
    const double va = d3 * d6 - d5 * d4;
    if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
        return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
    }
    const double denom = 1.0 / (va + vb + vc);
    return a + ab * (vb * denom) + ac * (vc * denom);
}

// Signed solid angle of triangle abc seen from p (Van Oosterom & Strackee).
double solid_angle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    const Vec3 x = a - p, y = b - p, z = c - p;
    const double lx = x.norm(), ly = y.norm(), lz = z.norm();
    const double num = x.dot(y.cross(z));
    const double den = lx * ly * lz + x.dot(y) * lz + y.dot(z) * lx + z.dot(x) * ly;
    return 2.0 * std::atan2(num, den);
}

}  // namespace

VolumeResult mesh_volume(const TriangleMesh& mesh) {
    if (mesh.empty()) {
        throw InputError("mesh_volume: mesh has no faces");
    }
    double v = 0.0;
    for (Eigen::Index f = 0; f < mesh.faces.rows(); ++f) {
        v += vertex(mesh, f, 0).dot(vertex(mesh, f, 1).cross(vertex(mesh, f, 2)));
    }
    return {std::abs(v) / 6.0, is_closed(mesh)};
}

bool is_closed(const TriangleMesh& mesh) {
    if (mesh.empty()) return false;
    std::map<std::pair<std::int32_t, std::int32_t>, int> count;
    for (Eigen::Index f = 0; f < mesh.faces.rows(); ++f) {
        for (int k = 0; k < 3; ++k) {
            auto a = mesh.faces(f, k);
            auto b = mesh.faces(f, (k + 1) % 3);
            if (a > b) std::swap(a, b);
            ++count[{a, b}];
        }
    }
    return std::all_of(count.begin(), count.end(), [](const auto& kv) { return kv.second == 2; });
}

PointSet sample_surface(const TriangleMesh& mesh, std::size_t n, Rng& rng) {
    if (mesh.empty()) {
        throw InputError("sample_surface: mesh has no faces");
    }
    std::vector<double> cdf(static_cast<std::size_t>(mesh.faces.rows()));
    double total = 0.0;
    for (Eigen::Index f = 0; f < mesh.faces.rows(); ++f) {
        const Vec3 a = vertex(mesh, f, 0);
        total += 0.5 * (vertex(mesh, f, 1) - a).cross(vertex(mesh, f, 2) - a).norm();
        cdf[static_cast<std::size_t>(f)] = total;
    }
    if (!(total > 0.0)) {
        throw InputError("sample_surface: mesh has zero area");
    }
    PointSet out(static_cast<Eigen::Index>(n), 3);
    for (std::size_t i = 0; i < n; ++i) {
        const double r = rng.uniform(0.0, total);
        auto f = static_cast<Eigen::Index>(std::upper_bound(cdf.begin(), cdf.end(), r) - cdf.begin());
        f = std::min<Eigen::Index>(f, mesh.faces.rows() - 1);
        double u = rng.uniform(), v = rng.uniform();
        if (u + v > 1.0) {
            u = 1.0 - u;
            v = 1.0 - v;
        }
        const Vec3 a = vertex(mesh, f, 0);
        out.row(static_cast<Eigen::Index>(i)) =
            (a + u * (vertex(mesh, f, 1) - a) + v * (vertex(mesh, f, 2) - a)).transpose();
    }
    return out;
}

Vec3 surface_centroid(const TriangleMesh& mesh) {
    if (mesh.empty()) {
        throw InputError("surface_centroid: mesh has no faces");
    }
    Vec3 c = Vec3::Zero();
    double total = 0.0;
    for (Eigen::Index f = 0; f < mesh.faces.rows(); ++f) {
        const Vec3 a = vertex(mesh, f, 0), b = vertex(mesh, f, 1), d = vertex(mesh, f, 2);
        const double area = 0.5 * (b - a).cross(d - a).norm();
        c += area * (a + b + d) / 3.0;
        total += area;
    }
    return total > 0.0 ? Vec3(c / total) : Vec3(mesh.vertices.colwise().mean().transpose());
}

MeshDistance::MeshDistance(const TriangleMesh& mesh) : mesh_(mesh) {
    if (mesh.empty()) {
        throw InputError("signed distance: mesh has no faces");
    }
}

double MeshDistance::signed_distance(const Vec3& p) const {
    double best = std::numeric_limits<double>::infinity();
    double winding = 0.0;
    for (Eigen::Index f = 0; f < mesh_.faces.rows(); ++f) {
        const Vec3 a = vertex(mesh_, f, 0), b = vertex(mesh_, f, 1), c = vertex(mesh_, f, 2);
        best = std::min(best, (closest_on_triangle(p, a, b, c) - p).squaredNorm());
        winding += solid_angle(p, a, b, c);
    }
    winding /= 4.0 * std::numbers::pi;
    const double d = std::sqrt(best);
    return winding > 0.5 ? -d : d;
}

void scale_mesh(TriangleMesh& mesh, double factor) { mesh.vertices *= factor; }

NormalizationTransform normalize_cohort(std::vector<TriangleMesh>& meshes, double radius) {
    NormalizationTransform t;
    double max_r = 0.0;
    for (auto& m : meshes) {
        const Vec3 c = surface_centroid(m);
        m.vertices.rowwise() -= c.transpose();
        t.centers.push_back(c);
        max_r = std::max(max_r, m.vertices.rowwise().norm().maxCoeff());
    }
    if (!(max_r > 0.0)) {
        throw InputError("normalize_cohort: degenerate meshes");
    }
    t.scale = radius / max_r;
    for (auto& m : meshes) scale_mesh(m, t.scale);
    return t;
}

}  // namespace shapedis::geometry
