#include "shapedis/stage1/decoder.hpp"

#include "shapedis/common/error.hpp"

#include <cmath>
#include <numbers>

namespace shapedis::stage1 {

DecoderConfig DecoderConfig::full_size() {
    DecoderConfig c;
    c.hidden = std::vector<int>(8, 512);
    c.skip_layer = 4;
    return c;
}

SdfDecoderImpl::SdfDecoderImpl(DecoderConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.hidden.empty() || cfg_.latent_dim < 1) {
        throw ConfigError("decoder needs >= 1 hidden layer and latent_dim >= 1");
    }
    const int in_dim = 3 + cfg_.latent_dim;
    int prev = in_dim;
    for (std::size_t l = 0; l <= cfg_.hidden.size(); ++l) {
        const bool last = l == cfg_.hidden.size();
        const int fan_in = prev + (static_cast<int>(l) == cfg_.skip_layer && l > 0 ? in_dim : 0);
        const int out = last ? 1 : cfg_.hidden[l];
        layers_.push_back(register_module("lin" + std::to_string(l), torch::nn::Linear(fan_in, out)));
        prev = out;
    }

    if (cfg_.geometric_init) {
        torch::NoGradGuard guard;
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            auto& w = layers_[l]->weight;
            auto& b = layers_[l]->bias;
            if (l + 1 == layers_.size()) {
                w.normal_(std::sqrt(std::numbers::pi) / std::sqrt(static_cast<double>(w.size(1))), 1e-4);
                b.fill_(-cfg_.init_radius);
                continue;
            }
            w.normal_(0.0, std::sqrt(2.0) / std::sqrt(static_cast<double>(w.size(0))));
            b.zero_();
            // Code inputs start with no influence so every shape begins as the same sphere.
            const bool takes_input = l == 0 || (static_cast<int>(l) == cfg_.skip_layer);
            if (takes_input) {
                const auto n_in = w.size(1);
                w.slice(1, n_in - cfg_.latent_dim, n_in).zero_();
            }
        }
    }
}

torch::Tensor SdfDecoderImpl::forward(const torch::Tensor& points, const torch::Tensor& codes) {
    if (points.dim() != 2 || points.size(1) != 3) {
        throw InputError("decoder: points must have shape [n, 3]");
    }
    torch::Tensor z = codes;
    if (z.dim() == 1) {
        z = z.unsqueeze(0).expand({points.size(0), z.size(0)});
    }
    if (z.dim() != 2 || z.size(1) != cfg_.latent_dim || z.size(0) != points.size(0)) {
        throw InputError("decoder: codes must have shape [d] or [n, d] with d = " +
                         std::to_string(cfg_.latent_dim));
    }
    const torch::Tensor input = torch::cat({points, z}, 1);
    torch::Tensor h = input;
    const auto opts = torch::nn::functional::SoftplusFuncOptions().beta(cfg_.softplus_beta).threshold(20.0);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        if (static_cast<int>(l) == cfg_.skip_layer && l > 0) {
            h = torch::cat({h, input}, 1) * M_SQRT1_2;
        }
        h = layers_[l]->forward(h);
        if (l + 1 < layers_.size()) {
            h = torch::nn::functional::softplus(h, opts);
        }
    }
    return h.squeeze(1);
}

torch::Tensor points_gradient(SdfDecoder& decoder, const torch::Tensor& points, const torch::Tensor& codes,
                              bool create_graph) {
    torch::Tensor p = points;
    if (!p.requires_grad()) {
        p = points.detach().requires_grad_(true);
    }
    const torch::Tensor out = decoder->forward(p, codes);
    return torch::autograd::grad({out}, {p}, {torch::ones_like(out)}, create_graph, create_graph)[0];
}

geometry::BatchField decoder_field(SdfDecoder decoder, torch::Tensor code, std::size_t chunk) {
    code = code.detach();
    return [decoder, code, chunk](const geometry::PointSet& pts, std::span<double> out) mutable {
        torch::NoGradGuard guard;
        const auto dtype = code.scalar_type();
        const auto n = pts.rows();
        const auto all = torch::from_blob(const_cast<double*>(pts.data()), {n, 3}, torch::kFloat64).to(dtype);
        for (int64_t begin = 0; begin < n; begin += static_cast<int64_t>(chunk)) {
            const int64_t end = std::min<int64_t>(n, begin + static_cast<int64_t>(chunk));
            const auto vals = decoder->forward(all.slice(0, begin, end), code).to(torch::kFloat64).contiguous();
            std::memcpy(out.data() + begin, vals.data_ptr<double>(), sizeof(double) * (end - begin));
        }
    };
}

geometry::TriangleMesh reconstruct_shape(SdfDecoder& decoder, const torch::Tensor& code,
                                         const geometry::MeshingOptions& options) {
    if (options.resolution < 8) {
        throw InputError("marching cubes resolution must be >= 8");
    }
    try {
        return geometry::extract_mesh(decoder_field(decoder, code), options);
    } catch (const InputError&) {
        // Non-finite field values from a wildly out-of-distribution code.
        return {};
    }
}

}  // namespace shapedis::stage1
