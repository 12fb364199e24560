#include "shapedis/stage1/losses.hpp"

#include "shapedis/common/error.hpp"

#include <cmath>
#include <numbers>

namespace shapedis::stage1 {

torch::Tensor clamped_l1(const torch::Tensor& pred, const torch::Tensor& target, double delta) {
    if (pred.sizes() != target.sizes()) {
        throw InputError("clamped_l1: pred and target differ in shape");
    }
    return (pred.clamp(-delta, delta) - target.clamp(-delta, delta)).abs().mean();
}

torch::Tensor sdf_recon_loss(const torch::Tensor& pred, const torch::Tensor& target, const torch::Tensor& codes,
                             double delta, double lambda_reg) {
    auto loss = clamped_l1(pred, target, delta);
    if (lambda_reg != 0.0 && codes.defined() && codes.numel() > 0) {
        loss = loss + lambda_reg * codes.pow(2).sum(-1).mean();
    }
    return loss;
}

torch::Tensor eikonal_from_gradient(const torch::Tensor& grad) {
    return (grad.norm(2, 1) - 1.0).pow(2).mean();
}

torch::Tensor eikonal_loss(SdfDecoder& decoder, const torch::Tensor& points, const torch::Tensor& codes) {
    return eikonal_from_gradient(points_gradient(decoder, points, codes, /*create_graph=*/true));
}

torch::Tensor gmm_prior_loss(const torch::Tensor& codes, const torch::Tensor& weights, const torch::Tensor& means,
                             const torch::Tensor& variances) {
    if (codes.dim() != 2 || means.dim() != 2 || codes.size(1) != means.size(1) ||
        variances.sizes() != means.sizes() || weights.size(0) != means.size(0)) {
        throw InputError("gmm_prior_loss: inconsistent mixture / code shapes");
    }
    const double log2pi = std::log(2.0 * std::numbers::pi);
    // [b, K, d]
    const auto diff = codes.unsqueeze(1) - means.unsqueeze(0);
    const auto log_norm = -0.5 * (variances.log().unsqueeze(0) + log2pi + diff.pow(2) / variances.unsqueeze(0)).sum(-1);
    const auto joint = log_norm + weights.log().unsqueeze(0);
    return -torch::logsumexp(joint, 1).mean();
}

MixturePriorImpl::MixturePriorImpl(int latent_dim, int components) {
    logits_ = register_parameter("logits", torch::zeros({components}));
    means_ = register_parameter("means", torch::zeros({components, latent_dim}));
    log_var_ = register_parameter("log_var", torch::zeros({components, latent_dim}));
}

void MixturePriorImpl::initialize(const torch::Tensor& means) {
    torch::NoGradGuard guard;
    means_.copy_(means);
    logits_.zero_();
    log_var_.zero_();
}

torch::Tensor MixturePriorImpl::weights() const { return torch::softmax(logits_, 0); }

torch::Tensor MixturePriorImpl::variances() const { return log_var_.exp().clamp_min(kVarianceFloor); }

torch::Tensor MixturePriorImpl::forward(const torch::Tensor& codes) {
    {
        torch::NoGradGuard guard;
        floor_hit_ = (log_var_.exp() < kVarianceFloor).any().item<bool>();
    }
    return gmm_prior_loss(codes, weights(), means_, variances());
}

}  // namespace shapedis::stage1
