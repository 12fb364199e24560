#include "shapedis/geometry/cohort.hpp"

#include "shapedis/common/error.hpp"
#include "shapedis/common/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace shapedis::geometry {

std::string_view to_string(Split split) {
    switch (split) {
        case Split::Train:
            return "train";
        case Split::Val:
            return "val";
        case Split::Test:
            return "test";
    }
    return "train";
}

Split parse_split(std::string_view name) {
    if (name == "train") return Split::Train;
    if (name == "val") return Split::Val;
    if (name == "test") return Split::Test;
    throw FormatError("unknown split: " + std::string(name));
}

std::vector<CohortMember> generate_cohort(const CohortConfig& cfg) {
    if (cfg.n < 2) {
        throw ConfigError("geometry.n must be >= 2");
    }
    if (!(cfg.class_balance > 0.0 && cfg.class_balance < 1.0)) {
        throw ConfigError("geometry.class_balance must lie in (0, 1)");
    }
    if (!(cfg.age_min < cfg.age_max)) {
        throw ConfigError("geometry.age_min must be < geometry.age_max");
    }
    if (!(cfg.base_radius > 0.0)) {
        throw ConfigError("geometry.base_radius must be positive");
    }

    Rng rng(cfg.seed);
    const auto n_diseased = static_cast<std::size_t>(std::llround(cfg.class_balance * cfg.n));
    std::vector<int> labels(cfg.n, 0);
    std::fill(labels.begin(), labels.begin() + n_diseased, 1);
    rng.shuffle(labels);

    std::vector<CohortMember> cohort(cfg.n);
    for (std::size_t i = 0; i < cfg.n; ++i) {
        auto& m = cohort[i];
        const int y = labels[i];
        const double center = y == 1 ? cfg.diseased_severity : cfg.healthy_severity;
        const double age = rng.uniform(cfg.age_min, cfg.age_max);

        m.shape.kind = cfg.kind;
        m.shape.base_radius = cfg.base_radius;
        m.shape.disease_severity = std::clamp(rng.normal(center, cfg.severity_spread), 0.0, 1.0);
        m.shape.age_factor = (age - cfg.age_min) / (cfg.age_max - cfg.age_min);
        m.shape.anatomy = cfg.anatomy;
        m.shape.dent_jitter = cfg.dent_jitter;
        m.shape.rng_seed = rng.fork();

        char id[32];
        std::snprintf(id, sizeof(id), "shape_%04zu", i);
        m.meta.shape_id = id;
        m.meta.age = age;
        m.meta.diagnosis = y;
    }

    // Stratified 80/10/10 split per class.
    for (int cls : {0, 1}) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < cfg.n; ++i) {
            if (labels[i] == cls) idx.push_back(i);
        }
        rng.shuffle(idx);
        const auto n_train = static_cast<std::size_t>(std::llround(0.8 * idx.size()));
        const auto n_val = static_cast<std::size_t>(std::llround(0.1 * idx.size()));
        for (std::size_t j = 0; j < idx.size(); ++j) {
            cohort[idx[j]].meta.split =
                j < n_train ? Split::Train : (j < n_train + n_val ? Split::Val : Split::Test);
        }
    }

    std::vector<ShapeMeta> metas;
    metas.reserve(cfg.n);
    for (const auto& m : cohort) metas.push_back(m.meta);
    normalize_ages(metas);
    for (std::size_t i = 0; i < cfg.n; ++i) cohort[i].meta.age_norm = metas[i].age_norm;
    return cohort;
}

void normalize_ages(std::vector<ShapeMeta>& metas) {
    if (metas.empty()) return;
    auto [lo, hi] = std::minmax_element(metas.begin(), metas.end(),
                                        [](const auto& a, const auto& b) { return a.age < b.age; });
    const double age_min = lo->age;
    const double age_max = hi->age;
    if (!(age_min < age_max)) {
        throw InputError("age normalization needs at least two distinct ages");
    }
    for (auto& m : metas) m.age_norm = (m.age - age_min) / (age_max - age_min);
}

}  // namespace shapedis::geometry
