#pragma once

#include "shapedis/stage2/trainer.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace shapedis::eval {

struct SweepInputs {
    /// Codes, age and samples; the disease labels are filled per cell.
    stage2::Stage2Data data;
    std::vector<int> truth;   // ground-truth diagnosis per row
    std::vector<int> pseudo;  // pseudo label per row
    stage2::Stage2Config config;
};

struct SweepCell {
    double fraction = 0.0;
    stage2::LabelPolicy policy = stage2::LabelPolicy::RealPlusPseudo;
    std::uint64_t seed = 0;
    std::optional<double> disease_sap;  // empty when skipped
    std::string skip_reason;
};

struct SweepSummary {
    double fraction = 0.0;
    stage2::LabelPolicy policy = stage2::LabelPolicy::RealPlusPseudo;
    double mean = 0.0;
    double std = 0.0;
    int runs = 0;
};

struct SweepTable {
    std::vector<SweepCell> cells;
    std::vector<SweepSummary> summary;  // per (fraction, policy) with at least one run

    const SweepSummary* find(double fraction, stage2::LabelPolicy policy) const;
};

/// Called before each cell; returning false marks it skipped ("budget").
using SweepGate = std::function<bool(const SweepCell&)>;

/// Trains stage 2 for every (fraction, policy, seed) and scores disease SAP on
/// posterior means of all rows. Fraction 0 under real+none is skipped.
/// Throws InputError for a fraction outside [0, 1].
SweepTable label_mixing_sweep(const SweepInputs& inputs, stage2::FrozenRenderer& renderer,
                              const std::vector<double>& fractions,
                              const std::vector<stage2::LabelPolicy>& policies,
                              const std::vector<std::uint64_t>& seeds, const SweepGate& gate = {});

}  // namespace shapedis::eval
