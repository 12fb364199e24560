#include "shapedis/geometry/marching_cubes.hpp"

#include "mc_tables.hpp"
#include "shapedis/common/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <unordered_map>
#include <vector>

namespace shapedis::geometry {
namespace {

constexpr std::array<std::array<int, 3>, 8> kCorner{{
    {0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
    {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1},
}};
constexpr std::array<std::array<int, 2>, 12> kEdge{{
    {0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
    {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7},
}};

double signed_volume(const TriangleMesh& mesh) {
    double v = 0.0;
    for (Eigen::Index f = 0; f < mesh.faces.rows(); ++f) {
        const Vec3 a = mesh.vertices.row(mesh.faces(f, 0));
        const Vec3 b = mesh.vertices.row(mesh.faces(f, 1));
        const Vec3 c = mesh.vertices.row(mesh.faces(f, 2));
        v += a.dot(b.cross(c));
    }
    return v / 6.0;
}

}  // namespace

TriangleMesh extract_mesh(const BatchField& field, const MeshingOptions& options) {
    const int res = options.resolution;
    if (res < 8) {
        throw InputError("marching cubes resolution must be >= 8");
    }
    const double step = 2.0 * options.bound / (res - 1);
    const auto coord = [&](int i) { return -options.bound + step * i; };
    const auto grid_index = [res](int x, int y, int z) {
        return static_cast<std::int64_t>(x) + res * (static_cast<std::int64_t>(y) +
                                                     static_cast<std::int64_t>(res) * z);
    };

    const std::int64_t total = static_cast<std::int64_t>(res) * res * res;
    std::vector<double> values(static_cast<std::size_t>(total));
    {
        const auto chunk = static_cast<std::int64_t>(std::max<std::size_t>(options.chunk, 1));
        PointSet pts;
        for (std::int64_t begin = 0; begin < total; begin += chunk) {
            const std::int64_t count = std::min(chunk, total - begin);
            pts.resize(count, 3);
            for (std::int64_t k = 0; k < count; ++k) {
                const std::int64_t g = begin + k;
                const int x = static_cast<int>(g % res);
                const int y = static_cast<int>((g / res) % res);
                const int z = static_cast<int>(g / (static_cast<std::int64_t>(res) * res));
                pts.row(k) << coord(x), coord(y), coord(z);
            }
            field(pts, std::span<double>(values.data() + begin, static_cast<std::size_t>(count)));
        }
    }
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw InputError("field is not finite on the meshing grid");
        }
    }

    std::vector<Vec3> verts;
    std::vector<std::array<std::int32_t, 3>> faces;
    std::unordered_map<std::int64_t, std::int32_t> edge_vertex;

    const auto vertex_on_edge = [&](int x, int y, int z, int e) {
        auto ca = kCorner[kEdge[e][0]];
        auto cb = kCorner[kEdge[e][1]];
        int axis = 0;
        while (ca[axis] == cb[axis]) ++axis;
        if (ca[axis] > cb[axis]) std::swap(ca, cb);
        const int ax = x + ca[0], ay = y + ca[1], az = z + ca[2];
        const std::int64_t ia = grid_index(ax, ay, az);
        const std::int64_t key = ia * 3 + axis;
        auto it = edge_vertex.find(key);
        if (it != edge_vertex.end()) return it->second;

        const std::int64_t ib = grid_index(x + cb[0], y + cb[1], z + cb[2]);
        const double va = values[static_cast<std::size_t>(ia)];
        const double vb = values[static_cast<std::size_t>(ib)];
        const double t = vb != va ? std::clamp((options.iso - va) / (vb - va), 0.0, 1.0) : 0.5;
        Vec3 p(coord(ax), coord(ay), coord(az));
        p[axis] += t * step;
        const auto id = static_cast<std::int32_t>(verts.size());
        verts.push_back(p);
        edge_vertex.emplace(key, id);
        return id;
    };

    for (int z = 0; z + 1 < res; ++z) {
        for (int y = 0; y + 1 < res; ++y) {
            for (int x = 0; x + 1 < res; ++x) {
                int cube = 0;
                for (int c = 0; c < 8; ++c) {
                    const double v = values[static_cast<std::size_t>(
                        grid_index(x + kCorner[c][0], y + kCorner[c][1], z + kCorner[c][2]))];
                    if (v < options.iso) cube |= 1 << c;
                }
                if (cube == 0 || cube == 255) continue;
                const int* tri = detail::kTriTable[cube];
                for (int i = 0; tri[i] != -1; i += 3) {
                    faces.push_back({vertex_on_edge(x, y, z, tri[i]),
                                     vertex_on_edge(x, y, z, tri[i + 1]),
                                     vertex_on_edge(x, y, z, tri[i + 2])});
                }
            }
        }
    }

    TriangleMesh mesh;
    mesh.vertices.resize(static_cast<Eigen::Index>(verts.size()), 3);
    for (std::size_t i = 0; i < verts.size(); ++i) {
        mesh.vertices.row(static_cast<Eigen::Index>(i)) = verts[i].transpose();
    }
    mesh.faces.resize(static_cast<Eigen::Index>(faces.size()), 3);
    for (std::size_t i = 0; i < faces.size(); ++i) {
        mesh.faces.row(static_cast<Eigen::Index>(i)) << faces[i][0], faces[i][1], faces[i][2];
    }
    // Table winding depends on the corner convention; orient outward explicitly.
    if (!mesh.empty() && signed_volume(mesh) < 0.0) {
        mesh.faces.col(1).swap(mesh.faces.col(2));
    }
    if (options.smoothing_iterations > 0 && !mesh.empty()) {
        laplacian_smooth(mesh, options.smoothing_iterations, options.smoothing_lambda);
    }
    return mesh;
}

TriangleMesh extract_mesh(const ScalarField& field, const MeshingOptions& options) {
    return extract_mesh(
        BatchField([&field](const PointSet& pts, std::span<double> out) {
            for (Eigen::Index i = 0; i < pts.rows(); ++i) {
                out[static_cast<std::size_t>(i)] = field(pts.row(i).transpose());
            }
        }),
        options);
}

void laplacian_smooth(TriangleMesh& mesh, int iterations, double lambda) {
    const Eigen::Index nv = mesh.vertices.rows();
    std::vector<std::vector<std::int32_t>> nbrs(static_cast<std::size_t>(nv));
    for (Eigen::Index f = 0; f < mesh.faces.rows(); ++f) {
        for (int k = 0; k < 3; ++k) {
            const auto a = mesh.faces(f, k);
            const auto b = mesh.faces(f, (k + 1) % 3);
            nbrs[static_cast<std::size_t>(a)].push_back(b);
            nbrs[static_cast<std::size_t>(b)].push_back(a);
        }
    }
    for (auto& n : nbrs) {
        std::sort(n.begin(), n.end());
        n.erase(std::unique(n.begin(), n.end()), n.end());
    }
    PointSet next(nv, 3);
    for (int it = 0; it < iterations; ++it) {
        for (Eigen::Index i = 0; i < nv; ++i) {
            const auto& n = nbrs[static_cast<std::size_t>(i)];
            if (n.empty()) {
                next.row(i) = mesh.vertices.row(i);
                continue;
            }
            Eigen::RowVector3d mean = Eigen::RowVector3d::Zero();
            for (auto j : n) mean += mesh.vertices.row(j);
            mean /= static_cast<double>(n.size());
            next.row(i) = mesh.vertices.row(i) + lambda * (mean - mesh.vertices.row(i));
        }
        mesh.vertices.swap(next);
    }
}

}  // namespace shapedis::geometry
