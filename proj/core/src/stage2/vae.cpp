#include "shapedis/stage2/vae.hpp"

#include "shapedis/common/error.hpp"

namespace shapedis::stage2 {

ResidualBlockImpl::ResidualBlockImpl(int width) {
    norm_ = register_module("norm", torch::nn::LayerNorm(torch::nn::LayerNormOptions({width})));
    fc1_ = register_module("fc1", torch::nn::Linear(width, width));
    fc2_ = register_module("fc2", torch::nn::Linear(width, width));
}

torch::Tensor ResidualBlockImpl::forward(const torch::Tensor& x) {
    return x + fc2_->forward(torch::gelu(fc1_->forward(norm_->forward(x))));
}

ResidualMlpImpl::ResidualMlpImpl(int in_dim, const std::vector<int>& hidden, int out_dim) {
    int prev = in_dim;
    for (std::size_t i = 0; i < hidden.size(); ++i) {
        proj_.push_back(register_module("proj" + std::to_string(i), torch::nn::Linear(prev, hidden[i])));
        blocks_.push_back(register_module("block" + std::to_string(i), ResidualBlock(hidden[i])));
        prev = hidden[i];
    }
    head_ = register_module("head", torch::nn::Linear(prev, out_dim));
}

torch::Tensor ResidualMlpImpl::forward(torch::Tensor x) {
    for (std::size_t i = 0; i < proj_.size(); ++i) {
        x = blocks_[i]->forward(torch::gelu(proj_[i]->forward(x)));
    }
    return head_->forward(x);
}

CodeVaeImpl::CodeVaeImpl(VaeConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.latent_dim < 1 || cfg_.latent_dim >= cfg_.input_dim) {
        throw ConfigError("stage2: latent_dim k must satisfy 1 <= k < d");
    }
    encoder_ = register_module("encoder", ResidualMlp(cfg_.input_dim, cfg_.encoder_hidden, 2 * cfg_.latent_dim));
    decoder_ = register_module("decoder", ResidualMlp(cfg_.latent_dim, cfg_.decoder_hidden, cfg_.input_dim));
}

Posterior CodeVaeImpl::encode(const torch::Tensor& codes) {
    const bool single = codes.dim() == 1;
    const auto x = single ? codes.unsqueeze(0) : codes;
    if (x.dim() != 2 || x.size(1) != cfg_.input_dim) {
        throw InputError("encode: expected codes of length " + std::to_string(cfg_.input_dim));
    }
    const auto out = encoder_->forward(x);
    Posterior p;
    p.mean = out.slice(1, 0, cfg_.latent_dim);
    p.logvar = out.slice(1, cfg_.latent_dim, 2 * cfg_.latent_dim).clamp(-cfg_.logvar_clamp, cfg_.logvar_clamp);
    if (single) {
        p.mean = p.mean.squeeze(0);
        p.logvar = p.logvar.squeeze(0);
    }
    return p;
}

torch::Tensor CodeVaeImpl::decode(const torch::Tensor& latents) {
    const bool single = latents.dim() == 1;
    const auto x = single ? latents.unsqueeze(0) : latents;
    if (x.dim() != 2 || x.size(1) != cfg_.latent_dim) {
        throw InputError("decode: expected latents of length " + std::to_string(cfg_.latent_dim));
    }
    const auto out = decoder_->forward(x);
    return single ? out.squeeze(0) : out;
}

torch::Tensor reparameterize(const Posterior& p, const torch::Tensor& noise) {
    return p.mean + torch::exp(0.5 * p.logvar) * noise;
}

}  // namespace shapedis::stage2
