#include "shapedis/eval/sweep.hpp"

#include "shapedis/common/error.hpp"
#include "shapedis/eval/metrics.hpp"
#include "shapedis/eval/report.hpp"

#include <cmath>

namespace shapedis::eval {

const SweepSummary* SweepTable::find(double fraction, stage2::LabelPolicy policy) const {
    for (const auto& s : summary) {
        if (s.policy == policy && std::abs(s.fraction - fraction) < 1e-12) return &s;
    }
    return nullptr;
}

SweepTable label_mixing_sweep(const SweepInputs& in, stage2::FrozenRenderer& renderer,
                              const std::vector<double>& fractions,
                              const std::vector<stage2::LabelPolicy>& policies,
                              const std::vector<std::uint64_t>& seeds, const SweepGate& gate) {
    for (double f : fractions) {
        if (!(f >= 0.0 && f <= 1.0)) throw InputError("label_mixing_sweep: fraction outside [0, 1]");
    }
    const std::vector<double> truth(in.truth.begin(), in.truth.end());
    SweepTable table;
    for (double f : fractions) {
        for (auto policy : policies) {
            std::vector<double> saps;
            for (auto seed : seeds) {
                SweepCell cell{f, policy, seed, std::nullopt, {}};
                if (policy == stage2::LabelPolicy::RealPlusNone && f == 0.0) {
                    cell.skip_reason = "no labels";
                } else if (gate && !gate(cell)) {
                    cell.skip_reason = "budget";
                } else {
                    auto data = in.data;
                    data.disease = stage2::mix_labels(in.truth, in.pseudo, f, policy, seed);
                    auto cfg = in.config;
                    cfg.seed = seed;
                    auto res = stage2::train_stage2(std::move(data), cfg, renderer);
                    const auto lat = stage2::encode_means(res.model.vae, in.data.codes);
                    cell.disease_sap = sap_score(lat, truth, FactorKind::Binary).sap;
                    saps.push_back(*cell.disease_sap);
                }
                table.cells.push_back(cell);
            }
            if (!saps.empty()) {
                const auto ms = mean_std(saps);
                table.summary.push_back({f, policy, ms.mean, ms.std, static_cast<int>(saps.size())});
            }
        }
    }
    return table;
}

}  // namespace shapedis::eval
