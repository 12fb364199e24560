#pragma once

#include "shapedis/geometry/marching_cubes.hpp"
#include "shapedis/geometry/types.hpp"
#include "shapedis/stage1/decoder.hpp"

#include <torch/torch.h>

#include <string>
#include <vector>

namespace shapedis::stage2 {

/// Stage-1 decoder reused with immutable parameters. Construction switches
/// off parameter gradients and records a checksum of the parameter bytes.
class FrozenRenderer {
public:
    explicit FrozenRenderer(stage1::SdfDecoder decoder);

    /// G(p, z) with gradients flowing to `codes` (and `points`) only.
    torch::Tensor sdf(const torch::Tensor& points, const torch::Tensor& codes);

    geometry::TriangleMesh render(const torch::Tensor& code, const geometry::MeshingOptions& options);

    const std::string& checksum() const { return checksum_; }
    std::string current_checksum() const;

    /// Throws ContractViolation if any parameter changed, requires grad, or
    /// holds an accumulated gradient.
    void verify() const;

    /// Throws ContractViolation if any of `params` aliases a renderer parameter.
    void ensure_not_optimized(const std::vector<torch::Tensor>& params) const;

    stage1::SdfDecoder& decoder() { return decoder_; }
    int latent_dim() const { return decoder_->latent_dim(); }

private:
    stage1::SdfDecoder decoder_;
    std::string checksum_;
};

}  // namespace shapedis::stage2
