#include "shapedis/stage1/trainer.hpp"

#include "shapedis/common/error.hpp"
#include "shapedis/common/rng.hpp"
#include "shapedis/stage1/checkpoint.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace shapedis::stage1 {

std::size_t Stage1Model::index_of(const std::string& shape_id) const {
    for (std::size_t i = 0; i < shape_ids.size(); ++i) {
        if (shape_ids[i] == shape_id) return i;
    }
    throw InputError("unknown shape id: " + shape_id);
}

namespace {

void validate(const Stage1Config& cfg) {
    if (cfg.batch_shapes < 1 || cfg.points_per_step < 1 || cfg.epochs < 0) {
        throw ConfigError("stage1: batch_shapes, points_per_step must be >= 1 and epochs >= 0");
    }
    if (!(cfg.clamp > 0.0)) throw ConfigError("stage1.clamp must be positive");
    if (cfg.lambda_eik < 0 || cfg.lambda_reg < 0 || cfg.lambda_gmm < 0) {
        throw ConfigError("stage1 loss weights must be >= 0");
    }
}

}  // namespace

Stage1Trainer::Stage1Trainer(std::vector<geometry::SampleSet> samples, Stage1Config cfg) {
    validate(cfg);
    if (samples.size() < 2) {
        throw InputError("train_stage1 needs at least 2 shapes");
    }
    for (auto& s : samples) {
        if (s.size() == 0) throw InputError("empty SampleSet for " + s.shape_id);
        model_.shape_ids.push_back(s.shape_id);
        samples_.push_back(torch::from_blob(s.rows.data(), {s.size(), 4}, torch::kFloat32).clone());
    }
    torch::manual_seed(cfg.seed);
    model_.config = cfg;
    model_.decoder = SdfDecoder(cfg.decoder);
    const auto n = static_cast<int64_t>(samples_.size());
    model_.codes = (torch::randn({n, cfg.decoder.latent_dim}) * cfg.code_init_std).requires_grad_(true);
    model_.prior = MixturePrior(cfg.decoder.latent_dim, 2);
    {
        Rng rng(mix_seed(cfg.seed, 1));
        const auto a = static_cast<int64_t>(rng.index(samples_.size()));
        auto b = static_cast<int64_t>(rng.index(samples_.size() - 1));
        if (b >= a) ++b;
        model_.prior->initialize(torch::stack({model_.codes[a], model_.codes[b]}).detach());
    }

    std::vector<torch::Tensor> params = model_.decoder->parameters();
    params.push_back(model_.codes);
    for (const auto& p : model_.prior->parameters()) params.push_back(p);
    optimizer_ = std::make_unique<torch::optim::Adam>(params, torch::optim::AdamOptions(cfg.lr));
}

Stage1Batch Stage1Trainer::make_batch(const std::vector<int>& shapes, std::uint64_t seed) const {
    Rng rng(seed);
    const int p = model_.config.points_per_step;
    std::vector<torch::Tensor> rows;
    std::vector<int64_t> owner;
    owner.reserve(shapes.size() * static_cast<std::size_t>(p));
    for (int s : shapes) {
        const auto& all = samples_[static_cast<std::size_t>(s)];
        std::vector<int64_t> idx(static_cast<std::size_t>(p));
        for (auto& i : idx) i = static_cast<int64_t>(rng.index(static_cast<std::size_t>(all.size(0))));
        rows.push_back(all.index_select(0, torch::tensor(idx, torch::kInt64)));
        owner.insert(owner.end(), static_cast<std::size_t>(p), s);
    }
    const auto data = torch::cat(rows, 0);
    Stage1Batch b;
    b.shapes = shapes;
    b.points = data.slice(1, 0, 3).contiguous();
    b.sdf = data.select(1, 3).contiguous();
    b.owner = torch::tensor(owner, torch::kInt64);
    return b;
}

Stage1Terms Stage1Trainer::objective(const Stage1Batch& batch, bool use_gmm) {
    const auto& cfg = model_.config;
    Stage1Terms t;
    const auto point_codes = model_.codes.index_select(0, batch.owner);
    const auto batch_codes =
        model_.codes.index_select(0, torch::tensor(std::vector<int64_t>(batch.shapes.begin(), batch.shapes.end())));

    torch::Tensor points = batch.points;
    const bool need_eik = cfg.lambda_eik > 0.0;
    if (need_eik) points = points.detach().requires_grad_(true);
    const auto pred = model_.decoder->forward(points, point_codes);

    t.sdf = clamped_l1(pred, batch.sdf, cfg.clamp);
    t.reg = batch_codes.pow(2).sum(-1).mean();
    t.total = t.sdf + cfg.lambda_reg * t.reg;
    if (need_eik) {
        const auto grad =
            torch::autograd::grad({pred}, {points}, {torch::ones_like(pred)}, /*retain_graph=*/true, true)[0];
        t.eikonal = eikonal_from_gradient(grad);
        t.total = t.total + cfg.lambda_eik * t.eikonal;
    } else {
        t.eikonal = torch::zeros({});
    }
    if (use_gmm && cfg.lambda_gmm > 0.0) {
        t.gmm = model_.prior->forward(batch_codes);
        t.total = t.total + cfg.lambda_gmm * t.gmm;
    } else {
        t.gmm = torch::zeros({});
    }
    return t;
}

Stage1EpochLog Stage1Trainer::run_epoch() {
    const auto& cfg = model_.config;
    const int epoch = model_.epoch;
    const double lr =
        cfg.lr * std::pow(cfg.lr_decay_factor, cfg.lr_decay_every > 0 ? epoch / cfg.lr_decay_every : 0);
    for (auto& group : optimizer_->param_groups()) {
        static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);
    }

    Rng rng(mix_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(epoch)));
    std::vector<int> order(samples_.size());
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);

    Stage1EpochLog log;
    log.epoch = epoch;
    int steps = 0;
    const bool use_gmm = epoch >= cfg.gmm_warmup_epochs;
    for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(cfg.batch_shapes)) {
        const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(cfg.batch_shapes));
        const std::vector<int> shapes(order.begin() + static_cast<long>(begin), order.begin() + static_cast<long>(end));
        const auto batch = make_batch(shapes, rng.fork());

        optimizer_->zero_grad();
        const auto terms = objective(batch, use_gmm);
        const double total = terms.total.item<double>();
        if (!std::isfinite(total)) {
            std::ostringstream msg;
            msg << "stage1: non-finite loss at epoch " << epoch << " (sdf=" << terms.sdf.item<double>()
                << " reg=" << terms.reg.item<double>() << " eik=" << terms.eikonal.item<double>()
                << " gmm=" << terms.gmm.item<double>() << ") shapes:";
            for (int s : shapes) msg << ' ' << model_.shape_ids[static_cast<std::size_t>(s)];
            throw NumericalError(msg.str());
        }
        terms.total.backward();
        torch::nn::utils::clip_grad_norm_(model_.decoder->parameters(), cfg.grad_clip);
        optimizer_->step();

        log.total += total;
        log.sdf += terms.sdf.item<double>();
        log.reg += terms.reg.item<double>();
        log.eikonal += terms.eikonal.item<double>();
        log.gmm += terms.gmm.item<double>();
        ++steps;
    }
    log.total /= steps;
    log.sdf /= steps;
    log.reg /= steps;
    log.eikonal /= steps;
    log.gmm /= steps;
    history_.push_back(log);
    ++model_.epoch;

    if (cfg.checkpoint_every > 0 && !cfg.checkpoint_path.empty() && model_.epoch % cfg.checkpoint_every == 0) {
        save_checkpoint(cfg.checkpoint_path);
    }
    return log;
}

void Stage1Trainer::train() {
    while (model_.epoch < model_.config.epochs) run_epoch();
}

void Stage1Trainer::save_checkpoint(const std::filesystem::path& path) const {
    save_stage1_checkpoint(path, model_, *optimizer_, history_);
}

std::unique_ptr<Stage1Trainer> Stage1Trainer::resume(const std::filesystem::path& path,
                                                     std::vector<geometry::SampleSet> samples) {
    auto state = load_stage1_checkpoint(path);
    auto trainer = std::make_unique<Stage1Trainer>(std::move(samples), state.model.config);
    if (trainer->model_.shape_ids != state.model.shape_ids) {
        throw InputError("resume: sample sets do not match the checkpoint's shapes");
    }
    {
        torch::NoGradGuard guard;
        const auto src = state.model.decoder->parameters();
        auto dst = trainer->model_.decoder->parameters();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i].copy_(src[i]);
        trainer->model_.codes.copy_(state.model.codes);
        const auto psrc = state.model.prior->parameters();
        auto pdst = trainer->model_.prior->parameters();
        for (std::size_t i = 0; i < pdst.size(); ++i) pdst[i].copy_(psrc[i]);
    }
    restore_stage1_optimizer(path, *trainer->optimizer_);
    trainer->model_.epoch = state.model.epoch;
    trainer->history_ = state.history;
    return trainer;
}

Stage1Result train_stage1(std::vector<geometry::SampleSet> samples, const Stage1Config& cfg) {
    Stage1Trainer trainer(std::move(samples), cfg);
    trainer.train();
    Stage1Result r{trainer.model(), trainer.history()};
    return r;
}

double sdf_residual(SdfDecoder& decoder, const torch::Tensor& code, const geometry::SampleSet& samples,
                    double delta) {
    torch::NoGradGuard guard;
    auto rows = torch::from_blob(const_cast<float*>(samples.rows.data()), {samples.size(), 4}, torch::kFloat32)
                    .to(code.scalar_type());
    const auto pred = decoder->forward(rows.slice(1, 0, 3), code.detach());
    return clamped_l1(pred, rows.select(1, 3), delta).item<double>();
}

}  // namespace shapedis::stage1
