#pragma once

#include "shapedis/geometry/cohort.hpp"
#include "shapedis/geometry/sampling.hpp"
#include "shapedis/geometry/types.hpp"

#include <filesystem>
#include <vector>

namespace shapedis::geometry {

// Meshes: ASCII OBJ (1-based faces on disk) and ASCII PLY.
void write_obj(const std::filesystem::path& path, const TriangleMesh& mesh);
TriangleMesh read_obj(const std::filesystem::path& path);
void write_ply(const std::filesystem::path& path, const TriangleMesh& mesh);
TriangleMesh read_ply(const std::filesystem::path& path);
/// Dispatches on the extension (.obj / .ply).
TriangleMesh read_mesh(const std::filesystem::path& path);

/// CSV with header `shape_id,age,diagnosis,split`; empty diagnosis = unlabeled.
void write_metadata(const std::filesystem::path& path, const std::vector<ShapeMeta>& metas);
/// Reads the CSV and recomputes age_norm over the file.
std::vector<ShapeMeta> read_metadata(const std::filesystem::path& path);

/// Sample cache: 16-byte header (magic "SDF1", uint32 m, 8 reserved bytes)
/// followed by m rows of little-endian float32 (x, y, z, s).
void write_sample_cache(const std::filesystem::path& path, const SampleSet& samples);
SampleSet read_sample_cache(const std::filesystem::path& path, std::string shape_id = {});

}  // namespace shapedis::geometry
