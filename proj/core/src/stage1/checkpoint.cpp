#include "shapedis/stage1/checkpoint.hpp"

#include "shapedis/common/container.hpp"
#include "shapedis/common/error.hpp"
#include "shapedis/common/tensor.hpp"

#include "json.hpp"

#include <sstream>

namespace shapedis::stage1 {

using nlohmann::json;

std::string stage1_config_to_json(const Stage1Config& c) {
    json j;
    j["decoder"] = {{"latent_dim", c.decoder.latent_dim},
                    {"hidden", c.decoder.hidden},
                    {"skip_layer", c.decoder.skip_layer},
                    {"softplus_beta", c.decoder.softplus_beta},
                    {"geometric_init", c.decoder.geometric_init},
                    {"init_radius", c.decoder.init_radius}};
    j["lambda_eik"] = c.lambda_eik;
    j["lambda_reg"] = c.lambda_reg;
    j["lambda_gmm"] = c.lambda_gmm;
    j["clamp"] = c.clamp;
    j["epochs"] = c.epochs;
    j["batch_shapes"] = c.batch_shapes;
    j["samples_per_shape"] = c.samples_per_shape;
    j["points_per_step"] = c.points_per_step;
    j["lr"] = c.lr;
    j["lr_decay_every"] = c.lr_decay_every;
    j["lr_decay_factor"] = c.lr_decay_factor;
    j["grad_clip"] = c.grad_clip;
    j["code_init_std"] = c.code_init_std;
    j["gmm_warmup_epochs"] = c.gmm_warmup_epochs;
    j["checkpoint_every"] = c.checkpoint_every;
    j["checkpoint_path"] = c.checkpoint_path.string();
    j["seed"] = c.seed;
    return j.dump();
}

Stage1Config stage1_config_from_json(const std::string& text) {
    Stage1Config c;
    try {
        const auto j = json::parse(text);
        const auto& d = j.at("decoder");
        c.decoder.latent_dim = d.at("latent_dim");
        c.decoder.hidden = d.at("hidden").get<std::vector<int>>();
        c.decoder.skip_layer = d.at("skip_layer");
        c.decoder.softplus_beta = d.at("softplus_beta");
        c.decoder.geometric_init = d.at("geometric_init");
        c.decoder.init_radius = d.at("init_radius");
        c.lambda_eik = j.at("lambda_eik");
        c.lambda_reg = j.at("lambda_reg");
        c.lambda_gmm = j.at("lambda_gmm");
        c.clamp = j.at("clamp");
        c.epochs = j.at("epochs");
        c.batch_shapes = j.at("batch_shapes");
        c.samples_per_shape = j.at("samples_per_shape");
        c.points_per_step = j.at("points_per_step");
        c.lr = j.at("lr");
        c.lr_decay_every = j.at("lr_decay_every");
        c.lr_decay_factor = j.at("lr_decay_factor");
        c.grad_clip = j.at("grad_clip");
        c.code_init_std = j.at("code_init_std");
        c.gmm_warmup_epochs = j.at("gmm_warmup_epochs");
        c.checkpoint_every = j.at("checkpoint_every");
        c.checkpoint_path = j.at("checkpoint_path").get<std::string>();
        c.seed = j.at("seed");
    } catch (const json::exception& e) {
        throw FormatError(std::string("stage1 config: ") + e.what());
    }
    return c;
}

void save_stage1_checkpoint(const std::filesystem::path& path, const Stage1Model& model,
                            const torch::optim::Optimizer& optimizer, const std::vector<Stage1EpochLog>& history) {
    Container c;
    c.put("config", stage1_config_to_json(model.config));
    c.put("decoder", module_to_bytes(*model.decoder));
    c.put("codes", tensor_to_bytes(model.codes.detach()));
    c.put("prior", module_to_bytes(*model.prior));
    {
        torch::serialize::OutputArchive archive;
        optimizer.save(archive);
        std::ostringstream os;
        archive.save_to(os);
        c.put("optimizer", os.str());
    }
    c.put_u64("epoch", static_cast<std::uint64_t>(model.epoch));
    json ids = model.shape_ids;
    c.put("shape_ids", ids.dump());
    json h = json::array();
    for (const auto& e : history) {
        h.push_back({e.epoch, e.total, e.sdf, e.reg, e.eikonal, e.gmm});
    }
    c.put("history", h.dump());
    c.write(path, kStage1Magic, kStage1Version);
}

Stage1State load_stage1_checkpoint(const std::filesystem::path& path) {
    const auto c = Container::read(path, kStage1Magic, kStage1Version);
    Stage1State s;
    s.model.config = stage1_config_from_json(c.get("config"));
    s.model.decoder = SdfDecoder(s.model.config.decoder);
    module_from_bytes(*s.model.decoder, c.get("decoder"));
    s.model.codes = tensor_from_bytes(c.get("codes"));
    s.model.prior = MixturePrior(s.model.config.decoder.latent_dim, 2);
    module_from_bytes(*s.model.prior, c.get("prior"));
    s.model.epoch = static_cast<int>(c.get_u64("epoch"));
    try {
        s.model.shape_ids = json::parse(c.get("shape_ids")).get<std::vector<std::string>>();
        for (const auto& e : json::parse(c.get("history"))) {
            s.history.push_back({e.at(0).get<int>(), e.at(1), e.at(2), e.at(3), e.at(4), e.at(5)});
        }
    } catch (const json::exception& e) {
        throw FormatError(std::string("stage1 checkpoint: ") + e.what());
    }
    if (s.model.codes.dim() != 2 || s.model.codes.size(0) != static_cast<int64_t>(s.model.shape_ids.size()) ||
        s.model.codes.size(1) != s.model.config.decoder.latent_dim) {
        throw FormatError("stage1 checkpoint: code table does not match shape ids / latent dim");
    }
    return s;
}

void restore_stage1_optimizer(const std::filesystem::path& path, torch::optim::Optimizer& optimizer) {
    const auto c = Container::read(path, kStage1Magic, kStage1Version);
    torch::serialize::InputArchive archive;
    std::istringstream is(c.get("optimizer"));
    archive.load_from(is);
    optimizer.load(archive);
}

}  // namespace shapedis::stage1
