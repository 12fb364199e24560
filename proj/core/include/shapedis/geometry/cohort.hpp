#pragma once

#include "shapedis/geometry/analytic_shape.hpp"

#include <optional>
#include <string>
#include <vector>

namespace shapedis::geometry {

enum class Split { Train, Val, Test };

std::string_view to_string(Split split);
Split parse_split(std::string_view name);

struct ShapeMeta {
    std::string shape_id;
    double age = 0.0;
    double age_norm = 0.0;
    /// Ground-truth diagnosis (1 = diseased); absent in the self-supervised setting.
    std::optional<int> diagnosis;
    Split split = Split::Train;
};

struct CohortConfig {
    std::size_t n = 200;
    double class_balance = 0.5;  // fraction of diseased shapes
    double age_min = 55.0;
    double age_max = 90.0;
    std::uint64_t seed = 0;
    ShapeKind kind = ShapeKind::LobedBlob;
    double base_radius = 0.7;
    double healthy_severity = 0.1;
    double diseased_severity = 0.9;
    double severity_spread = 0.08;  // std of the per-class severity distribution
    double anatomy = 0.5;           // per-subject lobe jitter amplitude
    double dent_jitter = 0.25;      // radians
};

struct CohortMember {
    AnalyticShape shape;
    ShapeMeta meta;
};

/// Deterministic synthetic cohort. Class sizes are round(n * class_balance)
/// diseased and the rest healthy; splits are stratified 80/10/10 per class.
std::vector<CohortMember> generate_cohort(const CohortConfig& cfg);

/// Recomputes age_norm = (age - min) / (max - min) over the given records.
/// Throws InputError when all ages are equal.
void normalize_ages(std::vector<ShapeMeta>& metas);

}  // namespace shapedis::geometry
