#pragma once

#include <torch/torch.h>

#include <functional>

namespace shapedis::stage2 {

/// Mean over the batch of 0.5 * sum_j (mu^2 + exp(logvar) - 1 - logvar).
torch::Tensor kl_loss(const torch::Tensor& mean, const torch::Tensor& logvar);

/// Mean squared error over batch and dimensions.
torch::Tensor code_recon_loss(const torch::Tensor& recon, const torch::Tensor& target);

inline constexpr double kMinTemperature = 1e-3;
inline constexpr double kMaxTemperature = 10.0;

/// Median of the pairwise squared distances of `values` [b], clipped to
/// [kMinTemperature, kMaxTemperature]. The result carries no gradient.
/// Throws InputError for b < 2.
torch::Tensor adaptive_temperature(const torch::Tensor& values);

struct SnnlOptions {
    int coord = 0;
    double threshold = 0.0;  // positives: |y_j - y_i| <= threshold
    double lambda1 = 0.5;
    double lambda2 = 0.5;
};

/// Soft nearest-neighbor loss on one designated coordinate of latents [b, k].
/// Only rows with mask == true take part (numerator, denominator and the 1/b
/// normalization); rows with no positive partner contribute 0. The
/// off-coordinate affinity averages squared distances over every coordinate
/// except `coord`. Returns 0 when fewer than two rows are labeled.
torch::Tensor snnl_loss(const torch::Tensor& latents, const torch::Tensor& labels, const torch::Tensor& mask,
                        const SnnlOptions& options, const torch::Tensor& temperature);

/// Squared Frobenius norm of the off-diagonal part of the unbiased batch
/// covariance. Throws InputError for b < 2.
torch::Tensor cov_loss(const torch::Tensor& latents);

struct DisSenTerms {
    torch::Tensor total;
    torch::Tensor spread;       // (s_c - mean s_other)^2
    torch::Tensor sensitivity;  // (max(0, eta - alpha_c) / eta)^2
    torch::Tensor alpha;        // mean ||D(z + eps e_c) - D(z - eps e_c)||
};

using LatentDecoder = std::function<torch::Tensor(const torch::Tensor&)>;

/// Distribution-and-sensitivity regularizer for coordinate `coord`; Std uses
/// the unbiased estimator. Throws InputError for b < 2 or non-positive eps/eta.
DisSenTerms dis_sen_loss(const torch::Tensor& latents, const LatentDecoder& decoder, int coord, double eps,
                         double eta);

}  // namespace shapedis::stage2
