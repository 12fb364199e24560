#pragma once

#include "shapedis/common/tensor.hpp"
#include "shapedis/geometry/cohort.hpp"
#include "shapedis/geometry/marching_cubes.hpp"
#include "shapedis/geometry/types.hpp"
#include "shapedis/stage2/renderer.hpp"

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace shapedis::eval {

/// Posterior means with evaluation covariates, one row per shape.
struct LatentTable {
    std::vector<std::string> shape_ids;
    RowMatrix latents;  // [N, k]
    std::vector<int> disease;  // ground truth, evaluation only
    std::vector<double> age_norm;
    std::vector<geometry::Split> splits;
};

struct SplitScores {
    double train = 0.0;
    double test = 0.0;
};

struct FactorMetrics {
    double sap = 0.0;
    int sap_top_dim = 0;
    std::vector<double> sap_scores;
    double pearson = 0.0;  // designated coordinate vs factor; NaN if the coordinate is constant
    SplitScores knn;       // accuracy % (disease) or RMSE (age)
};

struct EvaluationOptions {
    int disease_coord = 0;
    int age_coord = 1;
    int k_neighbors = 5;
};

struct LatentMetrics {
    FactorMetrics disease;
    FactorMetrics age;
};

/// SAP over all rows; kNN fitted on the train split and scored on train and
/// test (val rows count as test when the test split is empty).
LatentMetrics evaluate_latents(const LatentTable& table, const EvaluationOptions& options = {});

struct ReconstructionOptions {
    std::size_t n_points = 30000;
    int resolution = 64;
    std::uint64_t seed = 0;
};

struct ReconstructionStats {
    double mean_cd = 0.0;         // rendered round-tripped codes vs ground truth
    double stage1_mean_cd = 0.0;  // rendered stage-1 codes vs ground truth
    std::vector<double> per_shape;
    std::vector<double> stage1_per_shape;
    /// Shapes whose reconstruction was empty (either path); excluded from both means.
    std::vector<std::string> excluded;
};

using CodeMap = std::function<torch::Tensor(const torch::Tensor& codes)>;

/// Mean chamfer distance between ground-truth meshes and meshes rendered from
/// `code_map(codes)`. `codes` rows align with `truth`.
ReconstructionStats reconstruction_report(stage2::FrozenRenderer& renderer, const torch::Tensor& codes,
                                          const CodeMap& code_map,
                                          const std::vector<geometry::TriangleMesh>& truth,
                                          const ReconstructionOptions& options = {});

struct SeedReport {
    std::uint64_t seed = 0;
    LatentMetrics metrics;
    std::optional<double> recon_cd;
};

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // population std over seeds
};

MeanStd mean_std(const std::vector<double>& values);

/// Serialized evaluation summary. Holds no timings so reruns are byte-identical.
struct MetricsReport {
    std::string config_hash;
    std::string variant = "full";
    std::vector<SeedReport> seeds;
    std::optional<double> purity;
    std::optional<double> volume_gap;
    std::optional<double> stage1_cd;
    std::vector<std::string> recon_excluded;
};

std::string to_json(const MetricsReport& report);
void write_metrics_report(const std::filesystem::path& path, const MetricsReport& report);

/// Plain CSV table; cells are preformatted strings.
struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
};

void write_csv(const std::filesystem::path& path, const Table& table);
std::string format_number(double value, int precision = 4);

}  // namespace shapedis::eval
