#include "shapedis/stage2/checkpoint.hpp"

#include "shapedis/common/container.hpp"
#include "shapedis/common/error.hpp"
#include "shapedis/common/tensor.hpp"

#include "json.hpp"

namespace shapedis::stage2 {

using nlohmann::json;

std::string stage2_config_to_json(const Stage2Config& c) {
    json j;
    j["vae"] = {{"input_dim", c.vae.input_dim},
                {"latent_dim", c.vae.latent_dim},
                {"encoder_hidden", c.vae.encoder_hidden},
                {"decoder_hidden", c.vae.decoder_hidden},
                {"logvar_clamp", c.vae.logvar_clamp}};
    j["disease_coord"] = c.disease_coord;
    j["age_coord"] = c.age_coord;
    j["lambda_code"] = c.lambda_code;
    j["beta"] = c.beta;
    j["lambda_snnl"] = c.lambda_snnl;
    j["lambda1"] = c.lambda1;
    j["lambda2"] = c.lambda2;
    j["lambda_cov"] = c.lambda_cov;
    j["lambda_dis_sen"] = c.lambda_dis_sen;
    j["lambda_sdf"] = c.lambda_sdf;
    j["th_disease"] = c.th_disease;
    j["th_age"] = c.th_age;
    j["eps"] = c.eps;
    j["eta"] = c.eta;
    j["temperature"] = c.temperature == TemperatureMode::Adaptive ? "adaptive" : "fixed";
    j["fixed_temperature"] = c.fixed_temperature;
    j["epochs"] = c.epochs;
    j["batch"] = c.batch;
    j["sdf_points"] = c.sdf_points;
    j["sdf_clamp"] = c.sdf_clamp;
    j["sdf_eikonal"] = c.sdf_eikonal;
    j["lambda_sdf_eikonal"] = c.lambda_sdf_eikonal;
    j["snnl_on_means"] = c.snnl_on_means;
    j["dis_sen_coords"] = c.dis_sen_coords;
    j["lr"] = c.lr;
    j["grad_clip"] = c.grad_clip;
    j["seed"] = c.seed;
    return j.dump();
}

Stage2Config stage2_config_from_json(const std::string& text) {
    Stage2Config c;
    try {
        const auto j = json::parse(text);
        const auto& v = j.at("vae");
        c.vae.input_dim = v.at("input_dim");
        c.vae.latent_dim = v.at("latent_dim");
        c.vae.encoder_hidden = v.at("encoder_hidden").get<std::vector<int>>();
        c.vae.decoder_hidden = v.at("decoder_hidden").get<std::vector<int>>();
        c.vae.logvar_clamp = v.at("logvar_clamp");
        c.disease_coord = j.at("disease_coord");
        c.age_coord = j.at("age_coord");
        c.lambda_code = j.at("lambda_code");
        c.beta = j.at("beta");
        c.lambda_snnl = j.at("lambda_snnl");
        c.lambda1 = j.at("lambda1");
        c.lambda2 = j.at("lambda2");
        c.lambda_cov = j.at("lambda_cov");
        c.lambda_dis_sen = j.at("lambda_dis_sen");
        c.lambda_sdf = j.at("lambda_sdf");
        c.th_disease = j.at("th_disease");
        c.th_age = j.at("th_age");
        c.eps = j.at("eps");
        c.eta = j.at("eta");
        c.temperature = j.at("temperature") == "fixed" ? TemperatureMode::Fixed : TemperatureMode::Adaptive;
        c.fixed_temperature = j.at("fixed_temperature");
        c.epochs = j.at("epochs");
        c.batch = j.at("batch");
        c.sdf_points = j.at("sdf_points");
        c.sdf_clamp = j.at("sdf_clamp");
        c.sdf_eikonal = j.at("sdf_eikonal");
        c.lambda_sdf_eikonal = j.at("lambda_sdf_eikonal");
        c.snnl_on_means = j.at("snnl_on_means");
        c.dis_sen_coords = j.at("dis_sen_coords").get<std::vector<int>>();
        c.lr = j.at("lr");
        c.grad_clip = j.at("grad_clip");
        c.seed = j.at("seed");
    } catch (const json::exception& e) {
        throw FormatError(std::string("stage2 config: ") + e.what());
    }
    return c;
}

void save_stage2_checkpoint(const std::filesystem::path& path, const Stage2Model& model,
                            const std::string& stage1_checkpoint_hash) {
    Container c;
    c.put("config", stage2_config_to_json(model.config));
    c.put("vae", module_to_bytes(*model.vae));
    c.put("renderer_checksum", model.renderer_checksum);
    c.put("stage1_checkpoint_hash", stage1_checkpoint_hash);
    c.put_u64("seed", model.config.seed);
    c.put_u64("epoch", static_cast<std::uint64_t>(model.epoch));
    c.write(path, kStage2Magic, kStage2Version);
}

Stage2Checkpoint load_stage2_checkpoint(const std::filesystem::path& path) {
    const auto c = Container::read(path, kStage2Magic, kStage2Version);
    Stage2Checkpoint out;
    out.model.config = stage2_config_from_json(c.get("config"));
    out.model.config.seed = c.get_u64("seed");
    out.model.vae = CodeVae(out.model.config.vae);
    module_from_bytes(*out.model.vae, c.get("vae"));
    out.model.vae->eval();
    out.model.renderer_checksum = c.get("renderer_checksum");
    out.model.epoch = static_cast<int>(c.get_u64("epoch"));
    out.stage1_checkpoint_hash = c.get("stage1_checkpoint_hash");
    return out;
}

}  // namespace shapedis::stage2
