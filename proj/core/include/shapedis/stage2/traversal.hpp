#pragma once

#include "shapedis/common/tensor.hpp"
#include "shapedis/geometry/marching_cubes.hpp"
#include "shapedis/geometry/types.hpp"
#include "shapedis/stage2/renderer.hpp"
#include "shapedis/stage2/vae.hpp"

#include <optional>
#include <vector>

namespace shapedis::stage2 {

struct LatentRange {
    double lo = 0.0;
    double hi = 0.0;
};

/// Observed [min, max] of one coordinate, widened by `extend` of its width on each side.
LatentRange observed_range(const RowMatrix& latents, int coord, double extend = 0.1);

/// `count` evenly spaced values from lo to hi (inclusive).
std::vector<double> linspace(const LatentRange& range, int count);

struct TraversalResult {
    std::vector<double> values;
    std::vector<geometry::TriangleMesh> meshes;
    std::vector<double> volumes;  // 0 for empty meshes
    std::vector<bool> empty;
    bool any_empty = false;
};

/// For each value: overwrite coordinate `coord` of `base`, decode to a stage-1
/// code and render it with the frozen decoder. When `range` is given every
/// value must lie inside it (InputError otherwise).
TraversalResult latent_traverse(CodeVae& vae, const torch::Tensor& base, int coord, const std::vector<double>& values,
                                FrozenRenderer& renderer, const geometry::MeshingOptions& options,
                                const std::optional<LatentRange>& range = std::nullopt);

}  // namespace shapedis::stage2
