#include "shapedis/stage2/renderer.hpp"

#include "shapedis/common/error.hpp"
#include "shapedis/common/tensor.hpp"

namespace shapedis::stage2 {

FrozenRenderer::FrozenRenderer(stage1::SdfDecoder decoder) : decoder_(std::move(decoder)) {
    for (auto& p : decoder_->parameters()) {
        p.requires_grad_(false);
        p.mutable_grad() = torch::Tensor();
    }
    decoder_->eval();
    checksum_ = parameter_hash(*decoder_);
}

torch::Tensor FrozenRenderer::sdf(const torch::Tensor& points, const torch::Tensor& codes) {
    return decoder_->forward(points, codes);
}

geometry::TriangleMesh FrozenRenderer::render(const torch::Tensor& code, const geometry::MeshingOptions& options) {
    return stage1::reconstruct_shape(decoder_, code.detach(), options);
}

std::string FrozenRenderer::current_checksum() const { return parameter_hash(*decoder_); }

void FrozenRenderer::verify() const {
    for (const auto& p : decoder_->parameters()) {
        if (p.requires_grad() || p.grad().defined()) {
            throw ContractViolation("frozen renderer: a stage-1 parameter is trainable");
        }
    }
    if (current_checksum() != checksum_) {
        throw ContractViolation("frozen renderer: stage-1 parameters were modified");
    }
}

void FrozenRenderer::ensure_not_optimized(const std::vector<torch::Tensor>& params) const {
    for (const auto& mine : decoder_->parameters()) {
        for (const auto& p : params) {
            if (p.is_same(mine) || p.data_ptr() == mine.data_ptr()) {
                throw ContractViolation("frozen renderer: stage-1 parameters may not be optimized");
            }
        }
    }
}

}  // namespace shapedis::stage2
