#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <string>

namespace shapedis::geometry {

using Vec3 = Eigen::Vector3d;
/// n × 3 row-major point array.
using PointSet = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using FaceArray = Eigen::Matrix<std::int32_t, Eigen::Dynamic, 3, Eigen::RowMajor>;

struct TriangleMesh {
    PointSet vertices;
    FaceArray faces;
    std::string shape_id;

    bool empty() const { return faces.rows() == 0; }
    Eigen::Index num_vertices() const { return vertices.rows(); }
    Eigen::Index num_faces() const { return faces.rows(); }
};

}  // namespace shapedis::geometry
