#pragma once

#include "shapedis/geometry/marching_cubes.hpp"
#include "shapedis/geometry/types.hpp"

#include <torch/torch.h>

#include <vector>

namespace shapedis::stage1 {

struct DecoderConfig {
    int latent_dim = 64;
    std::vector<int> hidden = {128, 128, 128, 128};
    /// Hidden layer whose input is concatenated with the raw (p, z) input.
    int skip_layer = 2;
    /// Softplus sharpness; large values approach ReLU while staying twice differentiable.
    double softplus_beta = 100.0;
    /// Initialize so the untrained field approximates a sphere of init_radius.
    bool geometric_init = true;
    double init_radius = 0.5;

    /// 8 x 512 with a skip at the middle layer.
    static DecoderConfig full_size();
};

/// Auto-decoder SDF network G(p, z) -> s.
class SdfDecoderImpl : public torch::nn::Module {
public:
    explicit SdfDecoderImpl(DecoderConfig cfg);

    /// points: [n, 3]; codes: [n, d] or a single [d] code broadcast to all points.
    /// Returns [n]. Throws InputError on shape mismatch.
    torch::Tensor forward(const torch::Tensor& points, const torch::Tensor& codes);

    const DecoderConfig& config() const { return cfg_; }
    int latent_dim() const { return cfg_.latent_dim; }
    std::vector<torch::nn::Linear>& layers() { return layers_; }

private:
    DecoderConfig cfg_;
    std::vector<torch::nn::Linear> layers_;
};
TORCH_MODULE(SdfDecoder);

/// dG/dp for each point, [n, 3]. With create_graph the result stays
/// differentiable w.r.t. parameters and codes (needed by the eikonal term).
torch::Tensor points_gradient(SdfDecoder& decoder, const torch::Tensor& points, const torch::Tensor& codes,
                              bool create_graph);

/// Field evaluator over the decoder for one code, for marching cubes.
geometry::BatchField decoder_field(SdfDecoder decoder, torch::Tensor code, std::size_t chunk = 32768);

/// Renders the zero level set of G(., z). Degenerate codes may yield an empty mesh.
geometry::TriangleMesh reconstruct_shape(SdfDecoder& decoder, const torch::Tensor& code,
                                         const geometry::MeshingOptions& options);

}  // namespace shapedis::stage1
