#include "shapedis/stage2/traversal.hpp"

#include "shapedis/common/error.hpp"
#include "shapedis/geometry/mesh_ops.hpp"

namespace shapedis::stage2 {

LatentRange observed_range(const RowMatrix& latents, int coord, double extend) {
    if (latents.rows() == 0 || coord < 0 || coord >= latents.cols()) {
        throw InputError("observed_range: empty latents or coordinate out of range");
    }
    const double lo = latents.col(coord).minCoeff();
    const double hi = latents.col(coord).maxCoeff();
    const double pad = extend * (hi - lo);
    return {lo - pad, hi + pad};
}

std::vector<double> linspace(const LatentRange& range, int count) {
    std::vector<double> v;
    for (int i = 0; i < count; ++i) {
        v.push_back(count == 1 ? range.lo : range.lo + (range.hi - range.lo) * i / (count - 1));
    }
    return v;
}

TraversalResult latent_traverse(CodeVae& vae, const torch::Tensor& base, int coord, const std::vector<double>& values,
                                FrozenRenderer& renderer, const geometry::MeshingOptions& options,
                                const std::optional<LatentRange>& range) {
    const auto k = vae->config().latent_dim;
    if (base.dim() != 1 || base.size(0) != k) throw InputError("latent_traverse: base must have length k");
    if (coord < 0 || coord >= k) throw InputError("latent_traverse: coordinate out of range");
    TraversalResult r;
    torch::NoGradGuard guard;
    for (double v : values) {
        if (range && (v < range->lo - 1e-12 || v > range->hi + 1e-12)) {
            throw InputError("latent_traverse: value outside the observed latent range");
        }
        auto z = base.detach().to(torch::kFloat32).clone();
        z[coord] = v;
        const auto code = vae->decode(z);
        auto mesh = renderer.render(code, options);
        const bool empty = mesh.empty();
        r.values.push_back(v);
        r.volumes.push_back(empty ? 0.0 : geometry::mesh_volume(mesh).volume);
        r.empty.push_back(empty);
        r.any_empty = r.any_empty || empty;
        r.meshes.push_back(std::move(mesh));
    }
    return r;
}

}  // namespace shapedis::stage2
