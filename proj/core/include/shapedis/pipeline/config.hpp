#pragma once

#include "shapedis/geometry/cohort.hpp"
#include "shapedis/geometry/sampling.hpp"
#include "shapedis/pseudo/gmm_em.hpp"
#include "shapedis/stage1/trainer.hpp"
#include "shapedis/stage2/trainer.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace shapedis::pipeline {

struct GeometrySection {
    geometry::CohortConfig cohort;
    geometry::SamplingOptions sampling;
    int mesh_resolution = 96;  // ground-truth meshes written by make-data
    /// Import path: directory of <shape_id>.obj|.ply plus a metadata CSV.
    std::filesystem::path import_meshes;
    std::filesystem::path import_metadata;
};

struct PseudoSection {
    pseudo::EmOptions em;
    bool reuse_stage1_mixture = false;
};

struct Stage2Section {
    stage2::Stage2Config model;
    stage2::LabelPolicy policy = stage2::LabelPolicy::RealPlusPseudo;
    double real_fraction = 0.0;
    std::vector<std::uint64_t> seeds = {0, 1, 2};  // offset by the global seed
};

struct EvalSection {
    int k_neighbors = 5;
    std::size_t cd_points = 30000;
    int recon_resolution = 64;
    int recon_shapes = 20;  // 0 = every shape
    int traversal_points = 7;
    int traversal_resolution = 64;
    double traversal_extend = 0.1;
};

struct ReproduceSection {
    double time_budget_minutes = 0.0;  // 0 = unlimited
};

struct PipelineConfig {
    std::uint64_t seed = 0;
    bool deterministic = true;
    GeometrySection geometry;
    stage1::Stage1Config stage1;
    PseudoSection pseudo;
    Stage2Section stage2;
    EvalSection eval;
    ReproduceSection reproduce;

    /// Pushes the global seed and shared sizes into the module configs
    /// (stage-2 input size = stage-1 latent size, sample counts).
    void resolve();
    /// Cross-section consistency; throws ConfigError naming the key.
    void validate() const;
};

/// Reads a TOML file over the defaults. Unknown keys and type mismatches
/// throw ConfigError naming the dotted key.
PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig parse_config(const std::string& toml_text);

/// Canonical JSON of the resolved config (manifest snapshot).
std::string config_snapshot(const PipelineConfig& cfg);
/// TOML text that parse_config reads back to the same config.
std::string config_to_toml(const PipelineConfig& cfg);
/// SHA-256 of config_snapshot.
std::string config_hash(const PipelineConfig& cfg);

/// Stage-2 ablation presets: "full", "no_cov", "fixed_t", "no_disentangle"
/// (snnl, cov and dis_sen weights zero), "beta_vae" (only code + KL).
/// Throws ConfigError for an unknown name.
void apply_ablation(stage2::Stage2Config& cfg, const std::string& name);
const std::vector<std::string>& ablation_names();

/// Reduced settings that keep a 200-shape run on one CPU core in minutes.
PipelineConfig desk_config();

}  // namespace shapedis::pipeline
