#include "shapedis/pipeline/config.hpp"

#include "shapedis/common/error.hpp"
#include "shapedis/common/hash.hpp"
#include "shapedis/stage1/checkpoint.hpp"
#include "shapedis/stage2/checkpoint.hpp"

#include "json.hpp"
#include "toml.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace shapedis::pipeline {

namespace {

class Section {
public:
    Section(const toml::table* table, std::string name) : table_(table), name_(std::move(name)) {}

    template <class T>
    void get(const std::string& key, T& out) {
        const toml::node* n = find(key);
        if (!n) return;
        if constexpr (std::is_same_v<T, bool>) {
            auto v = n->value_exact<bool>();
            if (!v) type_error(key, "a boolean");
            out = *v;
        } else if constexpr (std::is_integral_v<T>) {
            auto v = n->value_exact<std::int64_t>();
            if (!v) type_error(key, "an integer");
            if (std::is_unsigned_v<T> && *v < 0) type_error(key, "a non-negative integer");
            out = static_cast<T>(*v);
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!n->is_number()) type_error(key, "a number");
            out = static_cast<T>(*n->value<double>());
        } else if constexpr (std::is_same_v<T, std::string>) {
            auto v = n->value_exact<std::string>();
            if (!v) type_error(key, "a string");
            out = *v;
        } else if constexpr (std::is_same_v<T, std::filesystem::path>) {
            auto v = n->value_exact<std::string>();
            if (!v) type_error(key, "a string");
            out = *v;
        } else {
            const auto* arr = n->as_array();
            if (!arr) type_error(key, "an array of integers");
            out.clear();
            for (const auto& e : *arr) {
                auto v = e.value_exact<std::int64_t>();
                if (!v || *v < 0) type_error(key, "an array of non-negative integers");
                out.push_back(static_cast<typename T::value_type>(*v));
            }
        }
    }

    void mark(const std::string& key) { seen_.insert(key); }

    /// Every key must have been read.
    void finish() const {
        if (!table_) return;
        for (const auto& [k, v] : *table_) {
            const std::string key(k.str());
            if (!seen_.count(key)) throw ConfigError("unknown config key '" + dotted(key) + "'");
        }
    }

private:
    const toml::node* find(const std::string& key) {
        seen_.insert(key);
        return table_ ? table_->get(key) : nullptr;
    }
    std::string dotted(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }
    [[noreturn]] void type_error(const std::string& key, const char* what) const {
        throw ConfigError("config key '" + dotted(key) + "' must be " + what);
    }

    const toml::table* table_;
    std::string name_;
    std::set<std::string> seen_;
};

void read_geometry(Section& s, GeometrySection& g) {
    auto& c = g.cohort;
    s.get("n", c.n);
    s.get("class_balance", c.class_balance);
    s.get("age_min", c.age_min);
    s.get("age_max", c.age_max);
    std::string kind(geometry::to_string(c.kind));
    s.get("kind", kind);
    try {
        c.kind = geometry::parse_shape_kind(kind);
    } catch (const ConfigError&) {
        throw ConfigError("config key 'geometry.kind' must be sphere, superellipsoid or lobed-blob");
    }
    s.get("base_radius", c.base_radius);
    s.get("healthy_severity", c.healthy_severity);
    s.get("diseased_severity", c.diseased_severity);
    s.get("severity_spread", c.severity_spread);
    s.get("anatomy", c.anatomy);
    s.get("dent_jitter", c.dent_jitter);
    auto& o = g.sampling;
    s.get("samples", o.count);
    s.get("surface_fraction", o.surface_fraction);
    s.get("noise_small", o.noise_small);
    s.get("noise_large", o.noise_large);
    s.get("surface_resolution", o.surface_resolution);
    s.get("mesh_resolution", g.mesh_resolution);
    s.get("import_meshes", g.import_meshes);
    s.get("import_metadata", g.import_metadata);
}

void read_stage1(Section& s, stage1::Stage1Config& c) {
    s.get("latent_dim", c.decoder.latent_dim);
    s.get("hidden", c.decoder.hidden);
    s.get("skip_layer", c.decoder.skip_layer);
    s.get("softplus_beta", c.decoder.softplus_beta);
    s.get("geometric_init", c.decoder.geometric_init);
    s.get("init_radius", c.decoder.init_radius);
    s.get("lambda_eik", c.lambda_eik);
    s.get("lambda_reg", c.lambda_reg);
    s.get("lambda_gmm", c.lambda_gmm);
    s.get("clamp", c.clamp);
    s.get("epochs", c.epochs);
    s.get("batch_shapes", c.batch_shapes);
    s.get("points_per_step", c.points_per_step);
    s.get("lr", c.lr);
    s.get("lr_decay_every", c.lr_decay_every);
    s.get("lr_decay_factor", c.lr_decay_factor);
    s.get("grad_clip", c.grad_clip);
    s.get("code_init_std", c.code_init_std);
    s.get("gmm_warmup_epochs", c.gmm_warmup_epochs);
    s.get("checkpoint_every", c.checkpoint_every);
}

void read_pseudo(Section& s, PseudoSection& p) {
    s.get("max_iter", p.em.max_iter);
    s.get("tol", p.em.tol);
    s.get("restarts", p.em.restarts);
    s.get("variance_floor", p.em.variance_floor);
    s.get("reuse_stage1_mixture", p.reuse_stage1_mixture);
}

void read_stage2(Section& s, Stage2Section& st) {
    auto& c = st.model;
    s.get("latent_dim", c.vae.latent_dim);
    s.get("encoder_hidden", c.vae.encoder_hidden);
    s.get("decoder_hidden", c.vae.decoder_hidden);
    s.get("logvar_clamp", c.vae.logvar_clamp);
    s.get("disease_coord", c.disease_coord);
    s.get("age_coord", c.age_coord);
    s.get("lambda_code", c.lambda_code);
    s.get("beta", c.beta);
    s.get("lambda_snnl", c.lambda_snnl);
    s.get("lambda1", c.lambda1);
    s.get("lambda2", c.lambda2);
    s.get("lambda_cov", c.lambda_cov);
    s.get("lambda_dis_sen", c.lambda_dis_sen);
    s.get("lambda_sdf", c.lambda_sdf);
    s.get("th_disease", c.th_disease);
    s.get("th_age", c.th_age);
    s.get("eps", c.eps);
    s.get("eta", c.eta);
    std::string temp = c.temperature == stage2::TemperatureMode::Fixed ? "fixed" : "adaptive";
    s.get("temperature", temp);
    if (temp != "adaptive" && temp != "fixed") {
        throw ConfigError("config key 'stage2.temperature' must be adaptive or fixed");
    }
    c.temperature = temp == "fixed" ? stage2::TemperatureMode::Fixed : stage2::TemperatureMode::Adaptive;
    s.get("fixed_temperature", c.fixed_temperature);
    s.get("epochs", c.epochs);
    s.get("batch", c.batch);
    s.get("sdf_points", c.sdf_points);
    s.get("sdf_clamp", c.sdf_clamp);
    s.get("sdf_eikonal", c.sdf_eikonal);
    s.get("lambda_sdf_eikonal", c.lambda_sdf_eikonal);
    s.get("snnl_on_means", c.snnl_on_means);
    s.get("dis_sen_coords", c.dis_sen_coords);
    s.get("lr", c.lr);
    s.get("grad_clip", c.grad_clip);
    std::string policy(stage2::to_string(st.policy));
    s.get("label_policy", policy);
    if (policy == "real+pseudo") {
        st.policy = stage2::LabelPolicy::RealPlusPseudo;
    } else if (policy == "real+none") {
        st.policy = stage2::LabelPolicy::RealPlusNone;
    } else {
        throw ConfigError("config key 'stage2.label_policy' must be real+pseudo or real+none");
    }
    s.get("real_fraction", st.real_fraction);
    s.get("seeds", st.seeds);
}

void read_eval(Section& s, EvalSection& e) {
    s.get("k_neighbors", e.k_neighbors);
    s.get("cd_points", e.cd_points);
    s.get("recon_resolution", e.recon_resolution);
    s.get("recon_shapes", e.recon_shapes);
    s.get("traversal_points", e.traversal_points);
    s.get("traversal_resolution", e.traversal_resolution);
    s.get("traversal_extend", e.traversal_extend);
}

const toml::table* subtable(const toml::table& root, const char* name) {
    const toml::node* n = root.get(name);
    if (!n) return nullptr;
    if (!n->is_table()) throw ConfigError(std::string("config key '") + name + "' must be a table");
    return n->as_table();
}

}  // namespace

void PipelineConfig::resolve() {
    geometry.cohort.seed = seed;
    geometry.sampling.seed = seed;
    stage1.seed = seed;
    stage1.samples_per_shape = static_cast<int>(geometry.sampling.count);
    pseudo.em.seed = seed;
    stage2.model.vae.input_dim = stage1.decoder.latent_dim;
}

void PipelineConfig::validate() const {
    const int d = stage1.decoder.latent_dim;
    const int k = stage2.model.vae.latent_dim;
    if (d < 1) throw ConfigError("config key 'stage1.latent_dim' must be >= 1");
    if (k < 1 || k >= d) {
        throw ConfigError("config key 'stage2.latent_dim' must satisfy 1 <= k < stage1.latent_dim (k=" +
                          std::to_string(k) + ", d=" + std::to_string(d) + ")");
    }
    if (stage2.model.vae.input_dim != d) throw ConfigError("stage2 input size differs from stage1.latent_dim");
    if (geometry.import_meshes.empty() != geometry.import_metadata.empty()) {
        throw ConfigError("config keys 'geometry.import_meshes' and 'geometry.import_metadata' go together");
    }
    if (geometry.import_meshes.empty()) {
        if (geometry.cohort.n < 2) throw ConfigError("config key 'geometry.n' must be >= 2");
        if (!(geometry.cohort.class_balance > 0.0 && geometry.cohort.class_balance < 1.0)) {
            throw ConfigError("config key 'geometry.class_balance' must lie in (0, 1)");
        }
        if (!(geometry.cohort.age_min < geometry.cohort.age_max)) {
            throw ConfigError("config key 'geometry.age_min' must be < geometry.age_max");
        }
    }
    if (geometry.sampling.count < 1) throw ConfigError("config key 'geometry.samples' must be >= 1");
    if (!(geometry.sampling.surface_fraction >= 0.0 && geometry.sampling.surface_fraction <= 1.0)) {
        throw ConfigError("config key 'geometry.surface_fraction' must lie in [0, 1]");
    }
    if (geometry.mesh_resolution < 8) throw ConfigError("config key 'geometry.mesh_resolution' must be >= 8");
    if (stage1.decoder.hidden.empty()) throw ConfigError("config key 'stage1.hidden' must not be empty");
    if (stage1.decoder.skip_layer < 0 || stage1.decoder.skip_layer >= static_cast<int>(stage1.decoder.hidden.size())) {
        throw ConfigError("config key 'stage1.skip_layer' must index a hidden layer");
    }
    if (stage1.epochs < 0) throw ConfigError("config key 'stage1.epochs' must be >= 0");
    if (stage1.batch_shapes < 1) throw ConfigError("config key 'stage1.batch_shapes' must be >= 1");
    if (stage1.points_per_step < 1) throw ConfigError("config key 'stage1.points_per_step' must be >= 1");
    if (!(stage1.clamp > 0.0)) throw ConfigError("config key 'stage1.clamp' must be positive");
    for (double w : {stage1.lambda_eik, stage1.lambda_reg, stage1.lambda_gmm}) {
        if (w < 0.0) throw ConfigError("stage1 loss weights must be >= 0");
    }
    if (pseudo.em.restarts < 1) throw ConfigError("config key 'pseudo.restarts' must be >= 1");
    stage2.model.validate();
    if (!(stage2.real_fraction >= 0.0 && stage2.real_fraction <= 1.0)) {
        throw ConfigError("config key 'stage2.real_fraction' must lie in [0, 1]");
    }
    if (stage2.seeds.empty()) throw ConfigError("config key 'stage2.seeds' must not be empty");
    if (eval.k_neighbors < 1) throw ConfigError("config key 'eval.k_neighbors' must be >= 1");
    if (eval.recon_resolution < 8 || eval.traversal_resolution < 8) {
        throw ConfigError("eval resolutions must be >= 8");
    }
    if (eval.traversal_points < 0) throw ConfigError("config key 'eval.traversal_points' must be >= 0");
}

PipelineConfig parse_config(const std::string& text) {
    toml::table root;
    try {
        root = toml::parse(text);
    } catch (const toml::parse_error& e) {
        std::ostringstream msg;
        msg << "config parse error at line " << e.source().begin.line << ": " << e.description();
        throw ConfigError(msg.str());
    }
    PipelineConfig cfg;
    Section top(&root, "");
    top.get("seed", cfg.seed);
    top.get("deterministic", cfg.deterministic);

    auto section = [&](const char* name, auto&& reader) {
        top.mark(name);
        Section s(subtable(root, name), name);
        reader(s);
        s.finish();
    };
    section("geometry", [&](Section& s) { read_geometry(s, cfg.geometry); });
    section("stage1", [&](Section& s) { read_stage1(s, cfg.stage1); });
    section("pseudo", [&](Section& s) { read_pseudo(s, cfg.pseudo); });
    section("stage2", [&](Section& s) { read_stage2(s, cfg.stage2); });
    section("eval", [&](Section& s) { read_eval(s, cfg.eval); });
    section("reproduce", [&](Section& s) { s.get("time_budget_minutes", cfg.reproduce.time_budget_minutes); });
    top.finish();
    cfg.resolve();
    cfg.validate();
    return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

namespace {

nlohmann::ordered_json snapshot_json(const PipelineConfig& c) {
    using nlohmann::ordered_json;
    ordered_json j;
    j["seed"] = c.seed;
    j["deterministic"] = c.deterministic;
    const auto& co = c.geometry.cohort;
    const auto& sa = c.geometry.sampling;
    auto& g = j["geometry"];
    g["n"] = co.n;
    g["class_balance"] = co.class_balance;
    g["age_min"] = co.age_min;
    g["age_max"] = co.age_max;
    g["kind"] = std::string(geometry::to_string(co.kind));
    g["base_radius"] = co.base_radius;
    g["healthy_severity"] = co.healthy_severity;
    g["diseased_severity"] = co.diseased_severity;
    g["severity_spread"] = co.severity_spread;
    g["anatomy"] = co.anatomy;
    g["dent_jitter"] = co.dent_jitter;
    g["samples"] = sa.count;
    g["surface_fraction"] = sa.surface_fraction;
    g["noise_small"] = sa.noise_small;
    g["noise_large"] = sa.noise_large;
    g["surface_resolution"] = sa.surface_resolution;
    g["mesh_resolution"] = c.geometry.mesh_resolution;
    if (!c.geometry.import_meshes.empty()) {
        g["import_meshes"] = c.geometry.import_meshes.string();
        g["import_metadata"] = c.geometry.import_metadata.string();
    }
    const auto& s1 = c.stage1;
    auto& a = j["stage1"];
    a["latent_dim"] = s1.decoder.latent_dim;
    a["hidden"] = s1.decoder.hidden;
    a["skip_layer"] = s1.decoder.skip_layer;
    a["softplus_beta"] = s1.decoder.softplus_beta;
    a["geometric_init"] = s1.decoder.geometric_init;
    a["init_radius"] = s1.decoder.init_radius;
    a["lambda_eik"] = s1.lambda_eik;
    a["lambda_reg"] = s1.lambda_reg;
    a["lambda_gmm"] = s1.lambda_gmm;
    a["clamp"] = s1.clamp;
    a["epochs"] = s1.epochs;
    a["batch_shapes"] = s1.batch_shapes;
    a["points_per_step"] = s1.points_per_step;
    a["lr"] = s1.lr;
    a["lr_decay_every"] = s1.lr_decay_every;
    a["lr_decay_factor"] = s1.lr_decay_factor;
    a["grad_clip"] = s1.grad_clip;
    a["code_init_std"] = s1.code_init_std;
    a["gmm_warmup_epochs"] = s1.gmm_warmup_epochs;
    a["checkpoint_every"] = s1.checkpoint_every;
    const auto& em = c.pseudo.em;
    auto& p = j["pseudo"];
    p["max_iter"] = em.max_iter;
    p["tol"] = em.tol;
    p["restarts"] = em.restarts;
    p["variance_floor"] = em.variance_floor;
    p["reuse_stage1_mixture"] = c.pseudo.reuse_stage1_mixture;
    const auto& m = c.stage2.model;
    auto& b = j["stage2"];
    b["latent_dim"] = m.vae.latent_dim;
    b["encoder_hidden"] = m.vae.encoder_hidden;
    b["decoder_hidden"] = m.vae.decoder_hidden;
    b["logvar_clamp"] = m.vae.logvar_clamp;
    b["disease_coord"] = m.disease_coord;
    b["age_coord"] = m.age_coord;
    b["lambda_code"] = m.lambda_code;
    b["beta"] = m.beta;
    b["lambda_snnl"] = m.lambda_snnl;
    b["lambda1"] = m.lambda1;
    b["lambda2"] = m.lambda2;
    b["lambda_cov"] = m.lambda_cov;
    b["lambda_dis_sen"] = m.lambda_dis_sen;
    b["lambda_sdf"] = m.lambda_sdf;
    b["th_disease"] = m.th_disease;
    b["th_age"] = m.th_age;
    b["eps"] = m.eps;
    b["eta"] = m.eta;
    b["temperature"] = m.temperature == stage2::TemperatureMode::Fixed ? "fixed" : "adaptive";
    b["fixed_temperature"] = m.fixed_temperature;
    b["epochs"] = m.epochs;
    b["batch"] = m.batch;
    b["sdf_points"] = m.sdf_points;
    b["sdf_clamp"] = m.sdf_clamp;
    b["sdf_eikonal"] = m.sdf_eikonal;
    b["lambda_sdf_eikonal"] = m.lambda_sdf_eikonal;
    b["snnl_on_means"] = m.snnl_on_means;
    b["dis_sen_coords"] = m.dis_sen_coords;
    b["lr"] = m.lr;
    b["grad_clip"] = m.grad_clip;
    b["label_policy"] = std::string(stage2::to_string(c.stage2.policy));
    b["real_fraction"] = c.stage2.real_fraction;
    b["seeds"] = c.stage2.seeds;
    const auto& e = c.eval;
    auto& v = j["eval"];
    v["k_neighbors"] = e.k_neighbors;
    v["cd_points"] = e.cd_points;
    v["recon_resolution"] = e.recon_resolution;
    v["recon_shapes"] = e.recon_shapes;
    v["traversal_points"] = e.traversal_points;
    v["traversal_resolution"] = e.traversal_resolution;
    v["traversal_extend"] = e.traversal_extend;
    j["reproduce"]["time_budget_minutes"] = c.reproduce.time_budget_minutes;
    return j;
}

void json_to_toml(const nlohmann::ordered_json& j, toml::table& out);

toml::array json_array(const nlohmann::ordered_json& j) {
    toml::array arr;
    for (const auto& e : j) {
        if (e.is_number_float()) {
            arr.push_back(e.get<double>());
        } else {
            arr.push_back(e.get<std::int64_t>());
        }
    }
    return arr;
}

void json_to_toml(const nlohmann::ordered_json& j, toml::table& out) {
    for (const auto& [k, v] : j.items()) {
        if (v.is_object()) {
            toml::table t;
            json_to_toml(v, t);
            out.insert(k, std::move(t));
        } else if (v.is_array()) {
            out.insert(k, json_array(v));
        } else if (v.is_boolean()) {
            out.insert(k, v.get<bool>());
        } else if (v.is_number_float()) {
            out.insert(k, v.get<double>());
        } else if (v.is_number()) {
            out.insert(k, v.get<std::int64_t>());
        } else {
            out.insert(k, v.get<std::string>());
        }
    }
}

}  // namespace

std::string config_snapshot(const PipelineConfig& cfg) { return snapshot_json(cfg).dump(); }

std::string config_to_toml(const PipelineConfig& cfg) {
    toml::table t;
    json_to_toml(snapshot_json(cfg), t);
    std::ostringstream os;
    os << t << "\n";
    return os.str();
}

std::string config_hash(const PipelineConfig& cfg) { return sha256_hex(config_snapshot(cfg)); }

const std::vector<std::string>& ablation_names() {
    static const std::vector<std::string> names = {"full", "no_cov", "fixed_t", "no_disentangle", "beta_vae"};
    return names;
}

void apply_ablation(stage2::Stage2Config& c, const std::string& name) {
    if (name == "full") return;
    if (name == "no_cov") {
        c.lambda_cov = 0.0;
    } else if (name == "fixed_t") {
        c.temperature = stage2::TemperatureMode::Fixed;
    } else if (name == "no_disentangle") {
        c.lambda_snnl = c.lambda_cov = c.lambda_dis_sen = 0.0;
    } else if (name == "beta_vae") {
        c.lambda_snnl = c.lambda_cov = c.lambda_dis_sen = c.lambda_sdf = 0.0;
    } else {
        std::string all;
        for (const auto& n : ablation_names()) all += (all.empty() ? "" : ", ") + n;
        throw ConfigError("unknown ablation '" + name + "' (expected one of " + all + ")");
    }
}

PipelineConfig desk_config() {
    PipelineConfig c;
    c.geometry.sampling.count = 16384;
    c.geometry.sampling.surface_resolution = 64;
    c.geometry.mesh_resolution = 64;
    c.stage1.epochs = 200;
    c.stage1.points_per_step = 256;
    c.stage1.lr_decay_every = 500;
    c.stage2.model.epochs = 500;
    c.stage2.model.sdf_points = 64;
    c.eval.cd_points = 10000;
    c.eval.recon_resolution = 48;
    c.eval.recon_shapes = 20;
    c.eval.traversal_resolution = 48;
    c.resolve();
    return c;
}

}  // namespace shapedis::pipeline
