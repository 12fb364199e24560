#pragma once

#include "shapedis/pipeline/config.hpp"
#include "shapedis/pipeline/manifest.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace shapedis::pipeline {

struct CommandOptions {
    std::filesystem::path runs_root = pipeline::runs_root();
    std::string run_id = "default";
    /// Empty: the run's snapshotted config.toml (defaults for make-data).
    std::optional<PipelineConfig> config;
    std::optional<std::uint64_t> seed;  // overrides config seed
    bool force = false;
    std::string ablation = "full";  // stage-2 variant for train-stage2 / eval / traverse
    std::ostream* log = nullptr;    // progress lines; silent when null

    std::filesystem::path run_dir() const { return runs_root / run_id; }
};

/// Synthetic cohort (or imported meshes) -> meshes, metadata CSV, SDF sample
/// caches, config snapshot and a fresh manifest. Refuses a non-empty data
/// directory without `force`.
void cmd_make_data(const CommandOptions& options);
void cmd_train_stage1(const CommandOptions& options);
/// Fresh EM on the stage-1 codes; writes pseudo labels and a cluster report.
void cmd_cluster(const CommandOptions& options);
/// One stage-2 model per configured seed for the selected ablation.
void cmd_train_stage2(const CommandOptions& options);
/// MetricsReport JSON and a Table-2 style CSV for the selected ablation.
void cmd_eval(const CommandOptions& options);
/// Disease and age traversal meshes under traversals/<ablation>/.
void cmd_traverse(const CommandOptions& options);
/// Mean chamfer distance of stage-1 reconstructions over the eval subset.
double stage1_reconstruction_cd(const CommandOptions& options);
/// Files in the run directory that no manifest entry accounts for.
std::vector<std::string> cmd_orphans(const CommandOptions& options);

/// Config for a command: explicit, else the run snapshot, with the seed override applied.
PipelineConfig resolve_config(const CommandOptions& options);

}  // namespace shapedis::pipeline
