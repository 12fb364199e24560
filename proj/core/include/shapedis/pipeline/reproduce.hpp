#pragma once

#include "shapedis/eval/report.hpp"
#include "shapedis/eval/sweep.hpp"
#include "shapedis/pipeline/commands.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace shapedis::pipeline {

struct ReproduceOptions {
    int table = 1;  // 1, 2 or 3
    std::string scale = "desk";
    /// run_id defaults to "reproduce-table<N>"; config defaults to desk_config().
    CommandOptions base;
};

struct ReproduceReport {
    std::filesystem::path dir;      // holds tables/ and report.md
    eval::Table table;              // synthetic values next to the reference columns
    std::vector<std::string> skipped;  // cells dropped by the time budget
    std::string text;               // report.md contents
};

/// Everything label_mixing_sweep needs from a run that has finished cluster.
struct SweepSetup {
    eval::SweepInputs inputs;
    stage1::SdfDecoder decoder{nullptr};
    std::vector<std::uint64_t> seeds;  // stage-2 seeds of the run config
};

/// Reads codes, samples, diagnoses and pseudo labels of a run. Throws
/// InputError when a diagnosis is missing.
SweepSetup load_sweep_setup(const CommandOptions& options);

/// Runs the experiment grid for one table and writes tables/table<N>.csv and
/// report.md. Reference columns hold the published real-cohort values; they
/// are a different dataset and only the direction of trends is comparable.
/// Throws ConfigError for an unknown table or scale.
ReproduceReport cmd_reproduce(const ReproduceOptions& options);

}  // namespace shapedis::pipeline
