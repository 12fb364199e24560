#pragma once

#include <torch/torch.h>

#include <vector>

namespace shapedis::stage2 {

struct VaeConfig {
    int input_dim = 64;  // stage-1 code length d
    int latent_dim = 8;  // k
    std::vector<int> encoder_hidden = {256, 128};
    std::vector<int> decoder_hidden = {128, 256, 256};
    double logvar_clamp = 10.0;
};

/// x + W2 GELU(W1 LayerNorm(x)).
class ResidualBlockImpl : public torch::nn::Module {
public:
    explicit ResidualBlockImpl(int width);
    torch::Tensor forward(const torch::Tensor& x);

private:
    torch::nn::LayerNorm norm_{nullptr};
    torch::nn::Linear fc1_{nullptr};
    torch::nn::Linear fc2_{nullptr};
};
TORCH_MODULE(ResidualBlock);

/// Stages of Linear -> GELU -> ResidualBlock, then a linear head.
class ResidualMlpImpl : public torch::nn::Module {
public:
    ResidualMlpImpl(int in_dim, const std::vector<int>& hidden, int out_dim);
    torch::Tensor forward(torch::Tensor x);
    torch::nn::Linear head() const { return head_; }

private:
    std::vector<torch::nn::Linear> proj_;
    std::vector<ResidualBlock> blocks_;
    torch::nn::Linear head_{nullptr};
};
TORCH_MODULE(ResidualMlp);

struct Posterior {
    torch::Tensor mean;    // [b, k]
    torch::Tensor logvar;  // [b, k], clamped
};

class CodeVaeImpl : public torch::nn::Module {
public:
    explicit CodeVaeImpl(VaeConfig cfg);

    /// codes [b, d] or [d]. Throws InputError on a dimension mismatch.
    Posterior encode(const torch::Tensor& codes);
    /// latents [b, k] or [k] -> reconstructed codes of matching rank.
    torch::Tensor decode(const torch::Tensor& latents);

    const VaeConfig& config() const { return cfg_; }
    ResidualMlp encoder() const { return encoder_; }
    ResidualMlp decoder() const { return decoder_; }

private:
    VaeConfig cfg_;
    ResidualMlp encoder_{nullptr};
    ResidualMlp decoder_{nullptr};
};
TORCH_MODULE(CodeVae);

/// mean + exp(logvar / 2) * noise.
torch::Tensor reparameterize(const Posterior& p, const torch::Tensor& noise);

}  // namespace shapedis::stage2
