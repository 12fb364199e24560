#pragma once

#include "shapedis/common/tensor.hpp"

#include <vector>

namespace shapedis::eval {

enum class FactorKind { Binary, Continuous };

/// Best accuracy in [0, 1] of a single threshold (either polarity) separating
/// binary labels by `values`.
double threshold_accuracy(const std::vector<double>& values, const std::vector<int>& labels);

/// R^2 of a 1-D least-squares fit of `target` on `values`; 0 for constant values.
double linear_r2(const std::vector<double>& values, const std::vector<double>& target);

struct SapResult {
    double sap = 0.0;
    std::vector<double> scores;  // per latent dimension
    int top_dim = 0;
};

/// Top minus second per-dimension predictiveness (threshold accuracy for a
/// binary factor, 1-D linear R^2 for a continuous one). Throws InputError for
/// fewer than two distinct factor values, fewer than two latent dimensions,
/// or a size mismatch.
SapResult sap_score(const RowMatrix& latents, const std::vector<double>& factor, FactorKind kind);

/// Throws InputError for fewer than 2 samples or zero variance.
double pearson_corr(const std::vector<double>& x, const std::vector<double>& y);

/// Pearson correlation of average ranks.
double spearman_corr(const std::vector<double>& x, const std::vector<double>& y);

enum class KnnMode { Classify, Regress };

struct KnnResult {
    std::vector<double> predictions;
    double score = 0.0;  // accuracy in percent, or RMSE
    int k_used = 0;
    bool k_clamped = false;
};

/// 1-D kNN on a latent coordinate. Neighbors ordered by distance, then index.
/// Vote ties go to the label of the nearest neighbor among the tied labels.
/// Throws InputError on an empty training set or a size mismatch.
KnnResult knn_predict(const std::vector<double>& train_x, const std::vector<double>& train_y,
                      const std::vector<double>& test_x, const std::vector<double>& test_y, KnnMode mode,
                      int k_neighbors = 5);

}  // namespace shapedis::eval
