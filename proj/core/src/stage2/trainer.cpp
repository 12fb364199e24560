#include "shapedis/stage2/trainer.hpp"

#include "shapedis/common/error.hpp"
#include "shapedis/common/rng.hpp"
#include "shapedis/stage1/losses.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace shapedis::stage2 {

std::string_view to_string(LabelPolicy policy) {
    return policy == LabelPolicy::RealPlusPseudo ? "real+pseudo" : "real+none";
}

std::vector<DiseaseLabel> mix_labels(const std::vector<int>& truth, const std::vector<int>& pseudo,
                                     double real_fraction, LabelPolicy policy, std::uint64_t seed) {
    if (!(real_fraction >= 0.0 && real_fraction <= 1.0)) {
        throw InputError("real label fraction must lie in [0, 1]");
    }
    const std::size_t n = truth.size();
    if (policy == LabelPolicy::RealPlusPseudo && pseudo.size() != n) {
        throw InputError("mix_labels: pseudo and true label vectors differ in length");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    rng.shuffle(order);
    const auto n_real = static_cast<std::size_t>(std::llround(real_fraction * static_cast<double>(n)));
    std::vector<bool> is_real(n, false);
    for (std::size_t i = 0; i < n_real; ++i) is_real[order[i]] = true;

    bool flip = false;
    if (policy == LabelPolicy::RealPlusPseudo && n_real > 0) {
        std::size_t agree = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (is_real[i] && pseudo[i] == truth[i]) ++agree;
        }
        flip = 2 * agree < n_real;
    }

    std::vector<DiseaseLabel> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (is_real[i]) {
            out[i] = {LabelSource::Real, truth[i]};
        } else if (policy == LabelPolicy::RealPlusPseudo) {
            out[i] = {LabelSource::Pseudo, flip ? 1 - pseudo[i] : pseudo[i]};
        }
    }
    return out;
}

void Stage2Config::validate() const {
    const int k = vae.latent_dim;
    if (disease_coord == age_coord) throw ConfigError("stage2: designated coordinates must differ");
    if (disease_coord < 0 || disease_coord >= k || age_coord < 0 || age_coord >= k) {
        throw ConfigError("stage2: designated coordinates must be < latent_dim");
    }
    for (int c : dis_sen_coords) {
        if (c < 0 || c >= k) throw ConfigError("stage2.dis_sen_coords: coordinate out of range");
    }
    for (double w : {lambda_code, beta, lambda_snnl, lambda1, lambda2, lambda_cov, lambda_dis_sen, lambda_sdf,
                     lambda_sdf_eikonal}) {
        if (w < 0.0) throw ConfigError("stage2: loss weights must be >= 0");
    }
    if (!(eps > 0.0) || !(eta > 0.0)) throw ConfigError("stage2: eps and eta must be positive");
    if (batch < 2) throw ConfigError("stage2.batch must be >= 2");
    if (epochs < 0 || sdf_points < 1) throw ConfigError("stage2: epochs >= 0 and sdf_points >= 1 required");
    if (temperature == TemperatureMode::Fixed && !(fixed_temperature > 0.0)) {
        throw ConfigError("stage2.fixed_temperature must be positive");
    }
}

Stage2Trainer::Stage2Trainer(Stage2Data data, Stage2Config cfg, FrozenRenderer& renderer)
    : data_(std::move(data)), renderer_(renderer) {
    cfg.validate();
    const auto n = static_cast<std::size_t>(data_.codes.size(0));
    if (data_.codes.dim() != 2 || n < 2) throw InputError("stage2: need a code table with >= 2 rows");
    if (data_.disease.size() != n || data_.age_norm.size() != n || data_.shape_ids.size() != n) {
        throw InputError("stage2: labels, ages and ids must have one entry per code");
    }
    if (data_.codes.size(1) != cfg.vae.input_dim || renderer_.latent_dim() != cfg.vae.input_dim) {
        throw InputError("stage2: code length does not match the VAE input / renderer latent size");
    }
    if (cfg.lambda_sdf > 0.0 && data_.samples.size() != n) {
        throw InputError("stage2: SDF pass-through needs stage-1 samples for every shape");
    }
    data_.codes = data_.codes.detach().to(torch::kFloat32);

    std::vector<int64_t> dv(n), dm(n);
    for (std::size_t i = 0; i < n; ++i) {
        dv[i] = data_.disease[i].value;
        dm[i] = data_.disease[i].labeled() ? 1 : 0;
    }
    disease_values_ = torch::tensor(dv, torch::kInt64).to(torch::kFloat32);
    disease_mask_ = torch::tensor(dm, torch::kInt64).to(torch::kBool);
    age_values_ = torch::tensor(data_.age_norm, torch::kFloat64).to(torch::kFloat32);

    torch::manual_seed(cfg.seed);
    model_.config = cfg;
    model_.vae = CodeVae(cfg.vae);
    model_.renderer_checksum = renderer_.checksum();
    const auto params = model_.vae->parameters();
    renderer_.ensure_not_optimized(params);
    optimizer_ = std::make_unique<torch::optim::Adam>(params, torch::optim::AdamOptions(cfg.lr));
}

SdfBatch Stage2Trainer::make_sdf_batch(const std::vector<int>& rows, std::uint64_t seed) const {
    SdfBatch b;
    if (model_.config.lambda_sdf <= 0.0) return b;
    Rng rng(seed);
    const int p = model_.config.sdf_points;
    std::vector<float> pts;
    std::vector<float> sdf;
    std::vector<int64_t> owner;
    pts.reserve(rows.size() * static_cast<std::size_t>(p) * 3);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto& s = data_.samples[static_cast<std::size_t>(rows[r])];
        if (s.size() == 0) throw InputError("stage2: empty SampleSet for " + s.shape_id);
        for (int j = 0; j < p; ++j) {
            const auto i = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(s.size())));
            pts.push_back(s.rows(i, 0));
            pts.push_back(s.rows(i, 1));
            pts.push_back(s.rows(i, 2));
            sdf.push_back(s.rows(i, 3));
            owner.push_back(static_cast<int64_t>(r));
        }
    }
    const auto n = static_cast<int64_t>(sdf.size());
    b.points = torch::from_blob(pts.data(), {n, 3}, torch::kFloat32).clone();
    b.sdf = torch::from_blob(sdf.data(), {n}, torch::kFloat32).clone();
    b.owner = torch::tensor(owner, torch::kInt64);
    return b;
}

Posterior Stage2Trainer::encode_rows(const std::vector<int>& rows) {
    const auto idx = torch::tensor(std::vector<int64_t>(rows.begin(), rows.end()), torch::kInt64);
    return model_.vae->encode(data_.codes.index_select(0, idx));
}

Stage2Terms Stage2Trainer::objective(const std::vector<int>& rows, const Posterior& post, const torch::Tensor& noise,
                                     const SdfBatch& sdf_batch) {
    const auto& cfg = model_.config;
    const auto idx = torch::tensor(std::vector<int64_t>(rows.begin(), rows.end()), torch::kInt64);
    const auto target = data_.codes.index_select(0, idx);
    const auto latents = reparameterize(post, noise);
    const auto recon = model_.vae->decode(latents);
    const auto zero = latents.sum() * 0.0;

    Stage2Terms t;
    t.code = code_recon_loss(recon, target);
    t.kl = kl_loss(post.mean, post.logvar);

    const auto& snnl_input = cfg.snnl_on_means ? post.mean : latents;
    const auto temperature_for = [&](int coord, const torch::Tensor& mask) {
        if (cfg.temperature == TemperatureMode::Fixed) {
            return torch::full({}, cfg.fixed_temperature, latents.options());
        }
        const auto sel = mask.nonzero().squeeze(1);
        if (sel.size(0) < 2) return torch::ones({}, latents.options());
        return adaptive_temperature(snnl_input.index_select(0, sel).select(1, coord));
    };
    if (cfg.lambda_snnl > 0.0) {
        const auto dmask = disease_mask_.index_select(0, idx);
        const auto amask = torch::ones({static_cast<int64_t>(rows.size())}, torch::kBool);
        SnnlOptions od{cfg.disease_coord, cfg.th_disease, cfg.lambda1, cfg.lambda2};
        SnnlOptions oa{cfg.age_coord, cfg.th_age, cfg.lambda1, cfg.lambda2};
        t.snnl_disease = snnl_loss(snnl_input, disease_values_.index_select(0, idx), dmask, od,
                                   temperature_for(cfg.disease_coord, dmask));
        t.snnl_age = snnl_loss(snnl_input, age_values_.index_select(0, idx), amask, oa,
                               temperature_for(cfg.age_coord, amask));
        t.snnl = t.snnl_disease + t.snnl_age;
    } else {
        t.snnl_disease = t.snnl_age = t.snnl = zero;
    }
    t.cov = cfg.lambda_cov > 0.0 ? cov_loss(snnl_input) : zero;

    t.dis_sen = zero;
    t.alpha = zero;
    if (cfg.lambda_dis_sen > 0.0) {
        auto& vae = model_.vae;
        const LatentDecoder dec = [&vae](const torch::Tensor& z) { return vae->decode(z); };
        for (std::size_t i = 0; i < cfg.dis_sen_coords.size(); ++i) {
            const auto terms = dis_sen_loss(post.mean, dec, cfg.dis_sen_coords[i], cfg.eps, cfg.eta);
            t.dis_sen = t.dis_sen + terms.total;
            if (i == 0) t.alpha = terms.alpha;
        }
    }

    t.sdf = zero;
    if (cfg.lambda_sdf > 0.0) {
        const auto codes = recon.index_select(0, sdf_batch.owner);
        torch::Tensor points = sdf_batch.points;
        if (cfg.sdf_eikonal) points = points.detach().requires_grad_(true);
        const auto pred = renderer_.sdf(points, codes);
        t.sdf = stage1::clamped_l1(pred, sdf_batch.sdf, cfg.sdf_clamp);
        if (cfg.sdf_eikonal) {
            const auto g = torch::autograd::grad({pred}, {points}, {torch::ones_like(pred)}, true, true)[0];
            t.sdf = t.sdf + cfg.lambda_sdf_eikonal * stage1::eikonal_from_gradient(g);
        }
    }

    t.total = cfg.lambda_code * t.code + cfg.beta * t.kl + cfg.lambda_snnl * t.snnl + cfg.lambda_cov * t.cov +
              cfg.lambda_dis_sen * t.dis_sen + cfg.lambda_sdf * t.sdf;
    return t;
}

Stage2EpochLog Stage2Trainer::run_epoch() {
    const auto& cfg = model_.config;
    const int epoch = model_.epoch;
    const auto n = static_cast<int>(data_.codes.size(0));
    Rng rng(mix_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(epoch)));
    auto gen = at::make_generator<at::CPUGeneratorImpl>(mix_seed(cfg.seed, 5000 + static_cast<std::uint64_t>(epoch)));

    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    std::vector<std::vector<int>> batches;
    for (int begin = 0; begin < n; begin += cfg.batch) {
        const int end = std::min(n, begin + cfg.batch);
        std::vector<int> rows(order.begin() + begin, order.begin() + end);
        if (rows.size() < 2 && !batches.empty()) {
            batches.back().insert(batches.back().end(), rows.begin(), rows.end());
        } else {
            batches.push_back(std::move(rows));
        }
    }

    Stage2EpochLog log;
    log.epoch = epoch;
    model_.vae->train();
    for (const auto& rows : batches) {
        const auto sdf_batch = make_sdf_batch(rows, rng.fork());
        optimizer_->zero_grad();
        const auto post = encode_rows(rows);
        const auto noise = torch::randn(post.mean.sizes(), gen, post.mean.options());
        const auto t = objective(rows, post, noise, sdf_batch);

        const double vals[7] = {t.total.item<double>(), t.code.item<double>(), t.kl.item<double>(),
                                t.snnl.item<double>(), t.cov.item<double>(), t.dis_sen.item<double>(),
                                t.sdf.item<double>()};
        for (double v : vals) {
            if (!std::isfinite(v)) {
                std::ostringstream msg;
                msg << "stage2: non-finite loss at epoch " << epoch << " (code=" << vals[1] << " kl=" << vals[2]
                    << " snnl=" << vals[3] << " cov=" << vals[4] << " dis_sen=" << vals[5] << " sdf=" << vals[6]
                    << ")";
                throw NumericalError(msg.str());
            }
        }
        t.total.backward();
        if (cfg.grad_clip > 0.0) torch::nn::utils::clip_grad_norm_(model_.vae->parameters(), cfg.grad_clip);
        optimizer_->step();

        log.total += vals[0];
        log.code += vals[1];
        log.kl += vals[2];
        log.snnl += vals[3];
        log.cov += vals[4];
        log.dis_sen += vals[5];
        log.sdf += vals[6];
    }
    const double steps = static_cast<double>(batches.size());
    log.total /= steps;
    log.code /= steps;
    log.kl /= steps;
    log.snnl /= steps;
    log.cov /= steps;
    log.dis_sen /= steps;
    log.sdf /= steps;
    history_.push_back(log);
    ++model_.epoch;
    return log;
}

void Stage2Trainer::train() {
    while (model_.epoch < model_.config.epochs) run_epoch();
    model_.vae->eval();
    renderer_.verify();
}

Stage2Result train_stage2(Stage2Data data, const Stage2Config& cfg, FrozenRenderer& renderer) {
    Stage2Trainer trainer(std::move(data), cfg, renderer);
    trainer.train();
    return {trainer.model(), trainer.history()};
}

std::vector<Stage2Result> train_stage2_seeds(const Stage2Data& data, const Stage2Config& cfg,
                                             FrozenRenderer& renderer, const std::vector<std::uint64_t>& seeds) {
    std::vector<Stage2Result> out;
    for (auto s : seeds) {
        auto c = cfg;
        c.seed = s;
        out.push_back(train_stage2(data, c, renderer));
    }
    return out;
}

RowMatrix encode_means(CodeVae& vae, const torch::Tensor& codes) {
    torch::NoGradGuard guard;
    return to_matrix(vae->encode(codes.to(torch::kFloat32)).mean);
}

torch::Tensor round_trip(CodeVae& vae, const torch::Tensor& codes) {
    torch::NoGradGuard guard;
    return vae->decode(vae->encode(codes.to(torch::kFloat32)).mean);
}

void write_stage2_log(const std::filesystem::path& path, const std::vector<Stage2EpochLog>& history) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    out << "epoch,total,code,kl,snnl,cov,dis_sen,sdf\n" << std::setprecision(9);
    for (const auto& e : history) {
        out << e.epoch << ',' << e.total << ',' << e.code << ',' << e.kl << ',' << e.snnl << ',' << e.cov << ','
            << e.dis_sen << ',' << e.sdf << '\n';
    }
}

}  // namespace shapedis::stage2
