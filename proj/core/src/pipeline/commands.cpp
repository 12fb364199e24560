#include "shapedis/pipeline/commands.hpp"

#include "shapedis/common/error.hpp"
#include "shapedis/common/hash.hpp"
#include "shapedis/common/rng.hpp"
#include "shapedis/common/tensor.hpp"
#include "shapedis/eval/metrics.hpp"
#include "shapedis/eval/report.hpp"
#include "shapedis/geometry/io.hpp"
#include "shapedis/geometry/mesh_ops.hpp"
#include "shapedis/pseudo/labeling.hpp"
#include "shapedis/stage1/checkpoint.hpp"
#include "shapedis/stage2/checkpoint.hpp"
#include "shapedis/stage2/traversal.hpp"

#include "json.hpp"

#include <chrono>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

namespace shapedis::pipeline {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr const char* kConfigFile = "config.toml";
constexpr const char* kMetadata = "data/metadata.csv";
constexpr const char* kStage1Ckpt = "stage1/checkpoint.s1ckpt";
constexpr const char* kPseudoCsv = "cluster/pseudo_labels.csv";
constexpr const char* kClusterReport = "cluster/report.json";

std::string hint(const CommandOptions& o, const std::string& command) {
    return "run `shapedis " + command + " --run-id " + o.run_id + "` first";
}

void say(const CommandOptions& o, const std::string& line) {
    if (o.log) *o.log << "[" << o.run_id << "] " << line << "\n";
}

/// Locked run directory with its manifest and resolved config.
struct Run {
    const CommandOptions& options;
    fs::path dir;
    RunLock lock;
    RunManifest manifest;
    PipelineConfig config;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

    explicit Run(const CommandOptions& o) : options(o), dir(o.run_dir()), lock(dir) {
        manifest = load_manifest(dir);
        config = resolve_config(o);
        if (config_hash(config) != manifest.config_hash) {
            throw ConfigError("config differs from the snapshot of run '" + o.run_id +
                              "'; rerun make-data with --force to change it");
        }
        if (config.deterministic) set_deterministic(config.seed);
    }

    /// Removes the files and entries a previous run of `stage` left behind.
    void reset_stage(const std::string& stage) {
        for (const auto& name : manifest.produced_by(stage)) {
            std::error_code ec;
            fs::remove(dir / manifest.artifacts[name].path, ec);
        }
        manifest.forget_stage(stage);
    }

    void finish(const std::string& stage) {
        manifest.timings[stage] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        save_manifest(dir, manifest);
    }
};

struct Dataset {
    std::vector<geometry::ShapeMeta> metas;
    std::vector<geometry::SampleSet> samples;
};

std::string mesh_path(const std::string& id) { return "data/meshes/" + id + ".obj"; }
std::string sample_path(const std::string& id) { return "data/samples/" + id + ".sdf"; }

Dataset load_dataset(const Run& run, bool with_samples) {
    const auto h = hint(run.options, "make-data");
    require_artifact(run.manifest, run.dir, "metadata", h);
    Dataset d;
    d.metas = geometry::read_metadata(run.dir / kMetadata);
    if (with_samples) {
        for (const auto& m : d.metas) {
            require_artifact(run.manifest, run.dir, "samples/" + m.shape_id, h);
            d.samples.push_back(geometry::read_sample_cache(run.dir / sample_path(m.shape_id), m.shape_id));
        }
    }
    return d;
}

std::vector<geometry::TriangleMesh> load_meshes(const Run& run, const std::vector<geometry::ShapeMeta>& metas) {
    std::vector<geometry::TriangleMesh> out;
    for (const auto& m : metas) {
        require_artifact(run.manifest, run.dir, "meshes/" + m.shape_id, hint(run.options, "make-data"));
        auto mesh = geometry::read_obj(run.dir / mesh_path(m.shape_id));
        mesh.shape_id = m.shape_id;
        out.push_back(std::move(mesh));
    }
    return out;
}

stage1::Stage1Model load_stage1(const Run& run) {
    require_artifact(run.manifest, run.dir, "stage1_checkpoint", hint(run.options, "train-stage1"));
    return stage1::load_stage1_checkpoint(run.dir / kStage1Ckpt).model;
}

std::vector<std::uint64_t> stage2_seeds(const PipelineConfig& cfg) {
    std::vector<std::uint64_t> out;
    for (auto s : cfg.stage2.seeds) out.push_back(cfg.seed + s);
    return out;
}

std::string stage2_name(const std::string& variant, std::uint64_t seed) {
    return "stage2/" + variant + "/seed_" + std::to_string(seed);
}

std::string write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + path.string());
    out << text;
    return text;
}

std::vector<int> require_diagnoses(const std::vector<geometry::ShapeMeta>& metas, const char* why) {
    std::vector<int> truth;
    for (const auto& m : metas) {
        if (!m.diagnosis) throw InputError(std::string(why) + " needs a diagnosis for every shape (" + m.shape_id + ")");
        truth.push_back(*m.diagnosis);
    }
    return truth;
}

std::vector<std::size_t> align(const std::vector<std::string>& ids, const std::vector<geometry::ShapeMeta>& metas) {
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < metas.size(); ++i) index[metas[i].shape_id] = i;
    std::vector<std::size_t> out;
    for (const auto& id : ids) {
        auto it = index.find(id);
        if (it == index.end()) throw InputError("shape '" + id + "' missing from metadata");
        out.push_back(it->second);
    }
    return out;
}

void make_synthetic(const fs::path& dir, const CommandOptions& o, const PipelineConfig& cfg,
                    std::vector<geometry::ShapeMeta>& metas) {
    const auto cohort = geometry::generate_cohort(cfg.geometry.cohort);
    const auto mopts = geometry::MeshingOptions::for_metrics(cfg.geometry.mesh_resolution);
    for (std::size_t i = 0; i < cohort.size(); ++i) {
        const auto& m = cohort[i];
        const geometry::AnalyticField field(m.shape);
        auto mesh = geometry::extract_mesh([&](const geometry::Vec3& p) { return field(p); }, mopts);
        mesh.shape_id = m.meta.shape_id;
        geometry::write_obj(dir / mesh_path(m.meta.shape_id), mesh);

        auto so = cfg.geometry.sampling;
        so.seed = mix_seed(cfg.seed, i);
        auto samples = geometry::sample_shape(m.shape, so);
        samples.shape_id = m.meta.shape_id;
        geometry::write_sample_cache(dir / sample_path(m.meta.shape_id), samples);
        metas.push_back(m.meta);
        if ((i + 1) % 50 == 0) say(o, "make-data: " + std::to_string(i + 1) + " shapes");
    }
}

void make_imported(const fs::path& dir, const PipelineConfig& cfg, std::vector<geometry::ShapeMeta>& metas) {
    metas = geometry::read_metadata(cfg.geometry.import_metadata);
    std::vector<geometry::TriangleMesh> meshes;
    for (const auto& m : metas) {
        fs::path p = cfg.geometry.import_meshes / (m.shape_id + ".obj");
        if (!fs::exists(p)) p = cfg.geometry.import_meshes / (m.shape_id + ".ply");
        if (!fs::exists(p)) throw InputError("no mesh for shape '" + m.shape_id + "' in " + cfg.geometry.import_meshes.string());
        meshes.push_back(geometry::read_mesh(p));
        meshes.back().shape_id = m.shape_id;
    }
    geometry::normalize_cohort(meshes);
    for (std::size_t i = 0; i < meshes.size(); ++i) {
        geometry::write_obj(dir / mesh_path(metas[i].shape_id), meshes[i]);
        auto so = cfg.geometry.sampling;
        so.seed = mix_seed(cfg.seed, i);
        auto samples = geometry::sample_shape(meshes[i], so);
        samples.shape_id = metas[i].shape_id;
        geometry::write_sample_cache(dir / sample_path(metas[i].shape_id), samples);
    }
}

struct ReconSubset {
    std::vector<geometry::TriangleMesh> meshes;
    torch::Tensor codes;
};

/// Reconstruction subset: test, then val, then train shapes, capped at eval.recon_shapes.
ReconSubset recon_subset(const Run& run, const std::vector<geometry::ShapeMeta>& ordered, const torch::Tensor& codes) {
    std::vector<std::size_t> subset;
    for (auto split : {geometry::Split::Test, geometry::Split::Val, geometry::Split::Train}) {
        for (std::size_t i = 0; i < ordered.size(); ++i) {
            if (ordered[i].split == split) subset.push_back(i);
        }
    }
    const int cap = run.config.eval.recon_shapes;
    if (cap > 0 && subset.size() > static_cast<std::size_t>(cap)) subset.resize(static_cast<std::size_t>(cap));
    std::vector<geometry::ShapeMeta> metas;
    std::vector<std::int64_t> rows;
    for (auto i : subset) {
        metas.push_back(ordered[i]);
        rows.push_back(static_cast<std::int64_t>(i));
    }
    return {load_meshes(run, metas), codes.detach().index_select(0, torch::tensor(rows, torch::kInt64))};
}

ordered_json read_json(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ordered_json::parse(ss.str());
}

}  // namespace

PipelineConfig resolve_config(const CommandOptions& o) {
    PipelineConfig cfg;
    if (o.config) {
        cfg = *o.config;
    } else if (fs::exists(o.run_dir() / kConfigFile)) {
        cfg = load_config(o.run_dir() / kConfigFile);
    }
    if (o.seed) cfg.seed = *o.seed;
    cfg.resolve();
    cfg.validate();
    return cfg;
}

void cmd_make_data(const CommandOptions& o) {
    const fs::path dir = o.run_dir();
    RunLock lock(dir);
    const auto start = std::chrono::steady_clock::now();
    const fs::path data = dir / "data";
    if (fs::exists(data) && !fs::is_empty(data)) {
        if (!o.force) throw InputError(data.string() + " is not empty; pass --force to regenerate");
        fs::remove_all(data);
    }
    CommandOptions fresh = o;
    if (!o.config) fresh.config = PipelineConfig{};
    const PipelineConfig cfg = resolve_config(fresh);
    if (cfg.deterministic) set_deterministic(cfg.seed);

    RunManifest manifest;
    if (fs::exists(dir / kManifestFile)) {
        manifest = load_manifest(dir);
        manifest.forget_stage("make-data");
    }
    manifest.run_id = o.run_id;
    manifest.config_snapshot = config_snapshot(cfg);
    manifest.config_hash = config_hash(cfg);
    manifest.seeds["global"] = {cfg.seed};
    manifest.seeds["stage2"] = stage2_seeds(cfg);

    fs::create_directories(data / "meshes");
    fs::create_directories(data / "samples");
    std::vector<geometry::ShapeMeta> metas;
    if (cfg.geometry.import_meshes.empty()) {
        make_synthetic(dir, o, cfg, metas);
    } else {
        make_imported(dir, cfg, metas);
    }
    geometry::write_metadata(dir / kMetadata, metas);
    write_text(dir / kConfigFile, config_to_toml(cfg));

    register_artifact(manifest, dir, "config", kConfigFile, "make-data");
    register_artifact(manifest, dir, "metadata", kMetadata, "make-data");
    for (const auto& m : metas) {
        register_artifact(manifest, dir, "meshes/" + m.shape_id, mesh_path(m.shape_id), "make-data");
        register_artifact(manifest, dir, "samples/" + m.shape_id, sample_path(m.shape_id), "make-data");
    }
    manifest.timings["make-data"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    save_manifest(dir, manifest);
    say(o, "make-data: wrote " + std::to_string(metas.size()) + " shapes");
}

void cmd_train_stage1(const CommandOptions& o) {
    Run run(o);
    auto data = load_dataset(run, true);
    run.reset_stage("train-stage1");
    auto cfg = run.config.stage1;
    if (cfg.checkpoint_every > 0) cfg.checkpoint_path = run.dir / kStage1Ckpt;
    fs::create_directories(run.dir / "stage1");

    stage1::Stage1Trainer trainer(std::move(data.samples), cfg);
    const int every = std::max(1, cfg.epochs / 10);
    while (trainer.model().epoch < cfg.epochs) {
        const auto log = trainer.run_epoch();
        if ((log.epoch + 1) % every == 0 || log.epoch + 1 == cfg.epochs) {
            std::ostringstream line;
            line << "train-stage1: epoch " << log.epoch + 1 << " total " << log.total << " sdf " << log.sdf;
            say(o, line.str());
        }
    }
    trainer.save_checkpoint(run.dir / kStage1Ckpt);

    std::ostringstream csv;
    csv.precision(17);
    csv << "epoch,total,sdf,reg,eikonal,gmm\n";
    for (const auto& h : trainer.history()) {
        csv << h.epoch << ',' << h.total << ',' << h.sdf << ',' << h.reg << ',' << h.eikonal << ',' << h.gmm << '\n';
    }
    write_text(run.dir / "stage1/history.csv", csv.str());

    const std::map<std::string, std::string> deps{{"metadata", run.manifest.find("metadata")->sha256}};
    register_artifact(run.manifest, run.dir, "stage1_checkpoint", kStage1Ckpt, "train-stage1", deps);
    register_artifact(run.manifest, run.dir, "stage1_history", "stage1/history.csv", "train-stage1");
    run.finish("train-stage1");
}

void cmd_cluster(const CommandOptions& o) {
    Run run(o);
    const auto model = load_stage1(run);
    const auto data = load_dataset(run, false);
    run.reset_stage("cluster");
    const auto codes = to_matrix(model.codes);

    pseudo::GaussianMixture mixture;
    ordered_json report;
    if (run.config.pseudo.reuse_stage1_mixture) {
        mixture.weights = to_matrix(model.prior->weights().unsqueeze(0)).row(0).transpose();
        mixture.means = to_matrix(model.prior->means());
        mixture.variances = to_matrix(model.prior->variances());
        report["source"] = "stage1 mixture";
    } else {
        const auto em = pseudo::fit_gmm_em(codes, run.config.pseudo.em);
        mixture = em.mixture;
        report["source"] = "em";
        report["em_iterations"] = em.iterations;
        report["em_best_restart"] = em.best_restart;
        report["em_collapsed"] = em.collapsed;
        report["em_log_likelihood"] = em.log_likelihood.empty() ? 0.0 : em.log_likelihood.back();
    }

    const auto rows = align(model.shape_ids, data.metas);
    std::vector<geometry::ShapeMeta> ordered;
    for (auto r : rows) ordered.push_back(data.metas[r]);
    const auto meshes = load_meshes(run, ordered);
    std::vector<double> volumes;
    for (const auto& m : meshes) volumes.push_back(geometry::mesh_volume(m).volume);

    const auto labeling = pseudo::assign_pseudo_labels(mixture, codes, model.shape_ids, volumes);
    pseudo::write_pseudo_labels(run.dir / kPseudoCsv, labeling);

    std::vector<int> sizes(2, 0);
    for (int l : labeling.labels) ++sizes[static_cast<std::size_t>(l)];
    report["cluster_sizes"] = sizes;
    if (sizes[0] > 0 && sizes[1] > 0) report["volume_gap"] = pseudo::mean_volume_gap(labeling.labels, volumes);
    bool all_labeled = true;
    std::vector<int> truth;
    for (const auto& m : ordered) {
        all_labeled = all_labeled && m.diagnosis.has_value();
        truth.push_back(m.diagnosis.value_or(0));
    }
    if (all_labeled) {
        const auto purity = pseudo::cluster_purity(labeling.labels, truth);
        report["purity"] = purity.percent;
        report["empty_clusters"] = purity.empty_clusters;
    }
    write_text(run.dir / kClusterReport, report.dump(2) + "\n");
    say(o, "cluster: " + report.dump());

    const std::map<std::string, std::string> deps{{"stage1_checkpoint", run.manifest.find("stage1_checkpoint")->sha256}};
    register_artifact(run.manifest, run.dir, "pseudo_labels", kPseudoCsv, "cluster", deps);
    register_artifact(run.manifest, run.dir, "cluster_report", kClusterReport, "cluster", deps);
    run.finish("cluster");
}

void cmd_train_stage2(const CommandOptions& o) {
    Run run(o);
    const auto& cfg = run.config;
    auto model1 = load_stage1(run);
    auto data = load_dataset(run, true);
    const auto rows = align(model1.shape_ids, data.metas);

    const bool needs_pseudo = cfg.stage2.policy == stage2::LabelPolicy::RealPlusPseudo && cfg.stage2.real_fraction < 1.0;
    std::vector<int> pseudo_labels(rows.size(), 0);
    std::map<std::string, std::string> deps{{"stage1_checkpoint", run.manifest.find("stage1_checkpoint")->sha256}};
    if (needs_pseudo) {
        require_artifact(run.manifest, run.dir, "pseudo_labels", hint(o, "cluster"));
        const auto labeling = pseudo::read_pseudo_labels(run.dir / kPseudoCsv);
        std::map<std::string, int> by_id;
        for (std::size_t i = 0; i < labeling.shape_ids.size(); ++i) by_id[labeling.shape_ids[i]] = labeling.labels[i];
        for (std::size_t i = 0; i < rows.size(); ++i) {
            auto it = by_id.find(model1.shape_ids[i]);
            if (it == by_id.end()) throw DependencyError("pseudo labels lack shape '" + model1.shape_ids[i] + "'; " + hint(o, "cluster"));
            pseudo_labels[i] = it->second;
        }
        deps["pseudo_labels"] = run.manifest.find("pseudo_labels")->sha256;
    }
    std::vector<int> truth(rows.size(), 0);
    if (cfg.stage2.real_fraction > 0.0) {
        std::vector<geometry::ShapeMeta> ordered;
        for (auto r : rows) ordered.push_back(data.metas[r]);
        truth = require_diagnoses(ordered, "stage2.real_fraction > 0");
    }

    stage2::Stage2Data sd;
    sd.shape_ids = model1.shape_ids;
    sd.codes = model1.codes.detach();
    for (auto r : rows) {
        sd.age_norm.push_back(data.metas[r].age_norm);
        sd.samples.push_back(data.samples[r]);
    }

    auto s2cfg = cfg.stage2.model;
    apply_ablation(s2cfg, o.ablation);
    const std::string stage = "train-stage2:" + o.ablation;
    run.reset_stage(stage);
    stage2::FrozenRenderer renderer(model1.decoder);
    const std::string s1hash = run.manifest.find("stage1_checkpoint")->sha256;
    for (auto seed : stage2_seeds(cfg)) {
        auto d = sd;
        d.disease = stage2::mix_labels(truth, pseudo_labels, cfg.stage2.real_fraction, cfg.stage2.policy, seed);
        auto c = s2cfg;
        c.seed = seed;
        stage2::Stage2Trainer trainer(std::move(d), c, renderer);
        const int every = std::max(1, c.epochs / 5);
        while (trainer.model().epoch < c.epochs) {
            const auto log = trainer.run_epoch();
            if ((log.epoch + 1) % every == 0 || log.epoch + 1 == c.epochs) {
                std::ostringstream line;
                line << "train-stage2[" << o.ablation << ", seed " << seed << "]: epoch " << log.epoch + 1 << " total "
                     << log.total;
                say(o, line.str());
            }
        }
        trainer.model().vae->eval();
        renderer.verify();

        const std::string name = stage2_name(o.ablation, seed);
        const std::string ckpt = name + ".s2ckpt";
        const std::string log = name + "_log.csv";
        fs::create_directories((run.dir / ckpt).parent_path());
        stage2::save_stage2_checkpoint(run.dir / ckpt, trainer.model(), s1hash);
        stage2::write_stage2_log(run.dir / log, trainer.history());
        register_artifact(run.manifest, run.dir, name, ckpt, stage, deps);
        register_artifact(run.manifest, run.dir, name + "/log", log, stage);
    }
    run.finish(stage);
}

void cmd_eval(const CommandOptions& o) {
    Run run(o);
    const auto& cfg = run.config;
    auto model1 = load_stage1(run);
    const auto data = load_dataset(run, false);
    const auto rows = align(model1.shape_ids, data.metas);
    std::vector<geometry::ShapeMeta> ordered;
    for (auto r : rows) ordered.push_back(data.metas[r]);

    eval::LatentTable table;
    table.shape_ids = model1.shape_ids;
    table.disease = require_diagnoses(ordered, "eval");
    for (const auto& m : ordered) {
        table.age_norm.push_back(m.age_norm);
        table.splits.push_back(m.split);
    }

    const auto recon = recon_subset(run, ordered, model1.codes);
    const auto& truth_meshes = recon.meshes;
    const auto& subset_codes = recon.codes;
    eval::ReconstructionOptions ro;
    ro.n_points = cfg.eval.cd_points;
    ro.resolution = cfg.eval.recon_resolution;
    ro.seed = cfg.seed;

    stage2::FrozenRenderer renderer(model1.decoder);
    const std::string s1hash = run.manifest.find("stage1_checkpoint")->sha256;
    eval::MetricsReport report;
    report.config_hash = run.manifest.config_hash;
    report.variant = o.ablation;
    std::optional<double> stage1_cd;
    std::vector<std::string> excluded;
    for (auto seed : stage2_seeds(cfg)) {
        const std::string name = stage2_name(o.ablation, seed);
        require_artifact(run.manifest, run.dir, name,
                         "run `shapedis train-stage2 --run-id " + o.run_id + " --ablation " + o.ablation + "` first");
        auto ck = stage2::load_stage2_checkpoint(run.dir / (name + ".s2ckpt"));
        if (ck.stage1_checkpoint_hash != s1hash || ck.model.renderer_checksum != renderer.checksum()) {
            throw DependencyError("stage-2 checkpoint '" + name + "' was trained against a different stage-1 " +
                                  "checkpoint; rerun train-stage2");
        }
        auto vae = ck.model.vae;
        vae->eval();
        table.latents = stage2::encode_means(vae, model1.codes);
        eval::EvaluationOptions eo;
        eo.disease_coord = ck.model.config.disease_coord;
        eo.age_coord = ck.model.config.age_coord;
        eo.k_neighbors = cfg.eval.k_neighbors;
        eval::SeedReport sr;
        sr.seed = seed;
        sr.metrics = eval::evaluate_latents(table, eo);
        const auto rec = eval::reconstruction_report(
            renderer, subset_codes, [&](const torch::Tensor& z) { return stage2::round_trip(vae, z); }, truth_meshes, ro);
        sr.recon_cd = rec.mean_cd;
        stage1_cd = rec.stage1_mean_cd;
        excluded = rec.excluded;
        report.seeds.push_back(sr);
    }
    renderer.verify();
    report.stage1_cd = stage1_cd;
    report.recon_excluded = excluded;
    std::map<std::string, std::string> deps{{"stage1_checkpoint", s1hash}};
    if (run.manifest.find("cluster_report") && fs::exists(run.dir / kClusterReport)) {
        const auto cj = read_json(run.dir / kClusterReport);
        if (cj.contains("purity")) report.purity = cj["purity"].get<double>();
        if (cj.contains("volume_gap")) report.volume_gap = cj["volume_gap"].get<double>();
        deps["cluster_report"] = run.manifest.find("cluster_report")->sha256;
    }

    const std::string stage = "eval:" + o.ablation;
    run.reset_stage(stage);
    const std::string base = "eval/" + o.ablation + "/";
    eval::write_metrics_report(run.dir / (base + "metrics.json"), report);

    eval::Table t2;
    t2.columns = {"variant", "seed", "disease_sap", "disease_corr", "disease_acc_train", "disease_acc_test",
                  "age_sap", "age_corr", "age_rmse_train", "age_rmse_test", "recon_cd"};
    auto row = [&](const std::string& seed, const eval::LatentMetrics& m, double cd) {
        using eval::format_number;
        t2.rows.push_back({o.ablation, seed, format_number(m.disease.sap), format_number(m.disease.pearson),
                           format_number(m.disease.knn.train, 2), format_number(m.disease.knn.test, 2),
                           format_number(m.age.sap), format_number(m.age.pearson), format_number(m.age.knn.train),
                           format_number(m.age.knn.test), format_number(cd, 6)});
    };
    eval::LatentMetrics mean;
    double mean_cd = 0.0;
    const double n = static_cast<double>(report.seeds.size());
    for (const auto& s : report.seeds) {
        row(std::to_string(s.seed), s.metrics, s.recon_cd.value_or(std::nan("")));
        mean.disease.sap += s.metrics.disease.sap / n;
        mean.disease.pearson += s.metrics.disease.pearson / n;
        mean.disease.knn.train += s.metrics.disease.knn.train / n;
        mean.disease.knn.test += s.metrics.disease.knn.test / n;
        mean.age.sap += s.metrics.age.sap / n;
        mean.age.pearson += s.metrics.age.pearson / n;
        mean.age.knn.train += s.metrics.age.knn.train / n;
        mean.age.knn.test += s.metrics.age.knn.test / n;
        mean_cd += s.recon_cd.value_or(std::nan("")) / n;
    }
    row("mean", mean, mean_cd);
    eval::write_csv(run.dir / (base + "table2.csv"), t2);

    register_artifact(run.manifest, run.dir, base + "metrics", base + "metrics.json", stage, deps);
    register_artifact(run.manifest, run.dir, base + "table2", base + "table2.csv", stage, deps);
    run.finish(stage);
    say(o, "eval: disease SAP " + eval::format_number(mean.disease.sap) + ", age SAP " + eval::format_number(mean.age.sap));
}

void cmd_traverse(const CommandOptions& o) {
    Run run(o);
    const auto& cfg = run.config;
    auto model1 = load_stage1(run);
    const auto seed = stage2_seeds(cfg).front();
    const std::string name = stage2_name(o.ablation, seed);
    require_artifact(run.manifest, run.dir, name,
                     "run `shapedis train-stage2 --run-id " + o.run_id + " --ablation " + o.ablation + "` first");
    auto ck = stage2::load_stage2_checkpoint(run.dir / (name + ".s2ckpt"));
    auto vae = ck.model.vae;
    vae->eval();
    stage2::FrozenRenderer renderer(model1.decoder);
    if (ck.model.renderer_checksum != renderer.checksum()) {
        throw DependencyError("stage-2 checkpoint '" + name + "' does not match the stage-1 decoder; rerun train-stage2");
    }

    const auto latents = stage2::encode_means(vae, model1.codes);
    Eigen::RowVectorXd mean = latents.colwise().mean();
    const auto base = torch::from_blob(mean.data(), {mean.size()}, torch::kFloat64).to(torch::kFloat32).clone();
    const int dc = ck.model.config.disease_coord, ac = ck.model.config.age_coord;
    const auto drange = stage2::observed_range(latents, dc, cfg.eval.traversal_extend);
    const auto arange = stage2::observed_range(latents, ac, cfg.eval.traversal_extend);
    const auto mopts = geometry::MeshingOptions::for_metrics(cfg.eval.traversal_resolution);

    const std::string stage = "traverse:" + o.ablation;
    run.reset_stage(stage);
    const std::string dir = "traversals/" + o.ablation + "/";
    fs::create_directories(run.dir / dir);
    std::ostringstream csv;
    csv.precision(10);
    csv << "series,index,disease_value,age_value,volume,empty\n";
    auto emit = [&](const std::string& series, int index, double dv, double av, geometry::TriangleMesh mesh, double volume,
                    bool empty) {
        csv << series << ',' << index << ',' << dv << ',' << av << ',' << volume << ',' << (empty ? 1 : 0) << '\n';
        if (empty) return;
        geometry::laplacian_smooth(mesh, 5, 0.5);
        const std::string file = dir + series + "_" + std::to_string(index) + ".obj";
        geometry::write_obj(run.dir / file, mesh);
        register_artifact(run.manifest, run.dir, file, file, stage);
    };

    const auto dvalues = stage2::linspace(drange, cfg.eval.traversal_points);
    const auto dres = stage2::latent_traverse(vae, base, dc, dvalues, renderer, mopts, drange);
    for (std::size_t i = 0; i < dvalues.size(); ++i) {
        emit("disease", static_cast<int>(i), dvalues[i], mean(ac), dres.meshes[i], dres.volumes[i], dres.empty[i]);
    }
    const auto avalues = stage2::linspace(arange, cfg.eval.traversal_points);
    const auto ares = stage2::latent_traverse(vae, base, ac, avalues, renderer, mopts, arange);
    for (std::size_t i = 0; i < avalues.size(); ++i) {
        emit("age", static_cast<int>(i), mean(dc), avalues[i], ares.meshes[i], ares.volumes[i], ares.empty[i]);
    }
    // Healthy / diseased pairs at matched ages.
    for (std::size_t i = 0; i < avalues.size(); ++i) {
        auto at_age = base.clone();
        at_age[ac] = avalues[i];
        const auto pair = stage2::latent_traverse(vae, at_age, dc, {drange.lo, drange.hi}, renderer, mopts, drange);
        emit("pair_lo", static_cast<int>(i), drange.lo, avalues[i], pair.meshes[0], pair.volumes[0], pair.empty[0]);
        emit("pair_hi", static_cast<int>(i), drange.hi, avalues[i], pair.meshes[1], pair.volumes[1], pair.empty[1]);
    }
    renderer.verify();
    write_text(run.dir / (dir + "volumes.csv"), csv.str());
    register_artifact(run.manifest, run.dir, dir + "volumes", dir + "volumes.csv", stage, {{name, run.manifest.find(name)->sha256}});
    run.finish(stage);

    std::vector<double> idx;
    for (std::size_t i = 0; i < dres.volumes.size(); ++i) idx.push_back(static_cast<double>(i));
    try {
        say(o, "traverse: disease volume Spearman " + eval::format_number(eval::spearman_corr(idx, dres.volumes)));
    } catch (const InputError&) {
        say(o, "traverse: disease volumes are constant");
    }
}

double stage1_reconstruction_cd(const CommandOptions& o) {
    Run run(o);
    auto model1 = load_stage1(run);
    const auto data = load_dataset(run, false);
    std::vector<geometry::ShapeMeta> ordered;
    for (auto r : align(model1.shape_ids, data.metas)) ordered.push_back(data.metas[r]);
    const auto recon = recon_subset(run, ordered, model1.codes);
    eval::ReconstructionOptions ro;
    ro.n_points = run.config.eval.cd_points;
    ro.resolution = run.config.eval.recon_resolution;
    ro.seed = run.config.seed;
    stage2::FrozenRenderer renderer(model1.decoder);
    const auto rec = eval::reconstruction_report(
        renderer, recon.codes, [](const torch::Tensor& z) { return z; }, recon.meshes, ro);
    return rec.stage1_mean_cd;
}

std::vector<std::string> cmd_orphans(const CommandOptions& o) {
    const auto manifest = load_manifest(o.run_dir());
    return find_orphans(o.run_dir(), manifest);
}

}  // namespace shapedis::pipeline
