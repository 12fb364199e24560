#include "shapedis/stage2/losses.hpp"

#include "shapedis/common/error.hpp"

namespace shapedis::stage2 {

torch::Tensor kl_loss(const torch::Tensor& mean, const torch::Tensor& logvar) {
    return (0.5 * (mean.pow(2) + logvar.exp() - 1.0 - logvar).sum(-1)).mean();
}

torch::Tensor code_recon_loss(const torch::Tensor& recon, const torch::Tensor& target) {
    if (recon.sizes() != target.sizes()) {
        throw InputError("code_recon_loss: shapes differ");
    }
    return (recon - target).pow(2).mean();
}

torch::Tensor adaptive_temperature(const torch::Tensor& values) {
    const auto v = values.detach().reshape({-1});
    const auto b = v.size(0);
    if (b < 2) {
        throw InputError("adaptive_temperature needs a batch of at least 2");
    }
    const auto d2 = (v.unsqueeze(0) - v.unsqueeze(1)).pow(2);
    const auto iu = torch::triu_indices(b, b, 1, torch::TensorOptions().dtype(torch::kLong));
    const auto pairs = std::get<0>(d2.index({iu[0], iu[1]}).sort());
    const auto n = pairs.size(0);
    auto med = n % 2 == 1 ? pairs[n / 2] : 0.5 * (pairs[n / 2 - 1] + pairs[n / 2]);
    return med.clamp(kMinTemperature, kMaxTemperature);
}

torch::Tensor snnl_loss(const torch::Tensor& latents, const torch::Tensor& labels, const torch::Tensor& mask,
                        const SnnlOptions& o, const torch::Tensor& temperature) {
    const auto k = latents.size(1);
    if (o.coord < 0 || o.coord >= k) {
        throw InputError("snnl_loss: coordinate out of range");
    }
    const auto idx = mask.to(torch::kBool).nonzero().squeeze(1);
    const auto b = idx.size(0);
    if (b < 2) {
        return latents.sum() * 0.0;
    }
    const auto z = latents.index_select(0, idx);
    const auto y = labels.index_select(0, idx).to(z.scalar_type());
    const auto zc = z.select(1, o.coord);

    const auto dc = (zc.unsqueeze(0) - zc.unsqueeze(1)).pow(2);
    const auto diff = (z.unsqueeze(0) - z.unsqueeze(1)).pow(2);  // [b, b, k]
    const auto d_other = (diff.sum(-1) - dc) / static_cast<double>(k - 1);
    const auto a_c = torch::exp(-dc / temperature);
    const auto a_other = torch::exp(-d_other / temperature);

    const auto off_diag = 1.0 - torch::eye(b, z.options());
    const auto pos = ((y.unsqueeze(0) - y.unsqueeze(1)).abs() <= o.threshold + 1e-12).to(z.scalar_type()) * off_diag;

    const auto num = (a_c * pos).sum(1);
    const auto den = o.lambda1 * (a_c * off_diag).sum(1) + o.lambda2 * (a_other * pos).sum(1);
    const auto has_pos = pos.sum(1) > 0;
    // Rows without positives are replaced by a neutral ratio before the log.
    const auto safe_num = torch::where(has_pos, num, torch::ones_like(num));
    const auto safe_den = torch::where(has_pos, den, torch::ones_like(den));
    const auto terms = -torch::log(safe_num / safe_den) * has_pos.to(z.scalar_type());
    return terms.sum() / static_cast<double>(b);
}

torch::Tensor cov_loss(const torch::Tensor& latents) {
    const auto b = latents.size(0);
    if (b < 2) {
        throw InputError("cov_loss needs a batch of at least 2");
    }
    const auto centered = latents - latents.mean(0, true);
    const auto cov = centered.t().mm(centered) / static_cast<double>(b - 1);
    const auto off = cov - torch::diag(torch::diag(cov));
    return off.pow(2).sum();
}

DisSenTerms dis_sen_loss(const torch::Tensor& latents, const LatentDecoder& decoder, int coord, double eps,
                         double eta) {
    const auto b = latents.size(0);
    const auto k = latents.size(1);
    if (b < 2) throw InputError("dis_sen_loss needs a batch of at least 2");
    if (!(eps > 0.0) || !(eta > 0.0)) throw InputError("dis_sen_loss: eps and eta must be positive");
    if (coord < 0 || coord >= k) throw InputError("dis_sen_loss: coordinate out of range");

    const auto stds = latents.std(0, /*unbiased=*/true);
    const auto s_c = stds[coord];
    const auto s_other = (stds.sum() - s_c) / static_cast<double>(k - 1);

    auto e = torch::zeros({1, k}, latents.options());
    e.index_put_({0, coord}, eps);
    const auto delta = decoder(latents + e) - decoder(latents - e);

    DisSenTerms t;
    t.alpha = delta.norm(2, 1).mean();
    t.spread = (s_c - s_other).pow(2);
    t.sensitivity = (torch::relu(eta - t.alpha) / eta).pow(2);
    t.total = t.spread + t.sensitivity;
    return t;
}

}  // namespace shapedis::stage2
