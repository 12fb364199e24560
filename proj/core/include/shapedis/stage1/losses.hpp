#pragma once

#include "shapedis/stage1/decoder.hpp"

#include <torch/torch.h>

namespace shapedis::stage1 {

/// mean |clamp(pred, ±delta) - clamp(target, ±delta)|.
torch::Tensor clamped_l1(const torch::Tensor& pred, const torch::Tensor& target, double delta);

/// Clamped-L1 reconstruction plus lambda_reg * mean_i ||z_i||^2 over the batch codes [b, d].
torch::Tensor sdf_recon_loss(const torch::Tensor& pred, const torch::Tensor& target, const torch::Tensor& codes,
                             double delta, double lambda_reg);

/// mean (||g_i|| - 1)^2 for spatial gradients g [n, 3].
torch::Tensor eikonal_from_gradient(const torch::Tensor& grad);

/// Eikonal penalty of the decoder at the given points; differentiable w.r.t.
/// decoder parameters and codes.
torch::Tensor eikonal_loss(SdfDecoder& decoder, const torch::Tensor& points, const torch::Tensor& codes);

/// Mean over codes [b, d] of -log sum_m pi_m N(z | mu_m, diag(var_m)).
/// weights [K], means [K, d], variances [K, d]. Zero weights are allowed.
torch::Tensor gmm_prior_loss(const torch::Tensor& codes, const torch::Tensor& weights, const torch::Tensor& means,
                             const torch::Tensor& variances);

inline constexpr double kVarianceFloor = 1e-6;

/// Learnable two-component diagonal mixture used as a prior over codes.
/// Weights are a softmax over logits and variances an exponential of
/// log-variances, floored at kVarianceFloor.
class MixturePriorImpl : public torch::nn::Module {
public:
    MixturePriorImpl(int latent_dim, int components = 2);

    /// Mean mixture NLL of the codes [b, d].
    torch::Tensor forward(const torch::Tensor& codes);

    /// Sets means from the given rows and resets weights / variances to (1/K, 1).
    void initialize(const torch::Tensor& means);

    torch::Tensor weights() const;
    torch::Tensor means() const { return means_; }
    torch::Tensor variances() const;

    /// True if the last forward pass had to floor a variance.
    bool variance_floor_hit() const { return floor_hit_; }

private:
    torch::Tensor logits_;
    torch::Tensor means_;
    torch::Tensor log_var_;
    bool floor_hit_ = false;
};
TORCH_MODULE(MixturePrior);

}  // namespace shapedis::stage1
