#pragma once

#include "shapedis/pseudo/gmm_em.hpp"

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace shapedis::pseudo {

struct PseudoLabeling {
    std::vector<std::string> shape_ids;
    std::vector<int> labels;        // 1 = "diseased" once volume ordering is applied
    std::vector<double> posteriors;  // responsibility of the assigned label
    /// cluster_to_class[m] is the label given to mixture component m.
    std::optional<std::array<int, 2>> cluster_to_class;
};

/// argmax posterior per code (exact ties go to component 0). With volumes,
/// components are renamed so label 1 is the cluster of smaller mean volume.
PseudoLabeling assign_pseudo_labels(const GaussianMixture& mixture, const RowMatrix& codes,
                                    const std::vector<std::string>& shape_ids,
                                    const std::optional<std::vector<double>>& volumes = std::nullopt);

struct PurityResult {
    double percent = 0.0;
    std::vector<int> empty_clusters;  // excluded from the mean
};

/// Mean over non-empty clusters of the majority-class fraction, in percent.
/// Throws InputError on length mismatch or when every cluster is empty.
PurityResult cluster_purity(const std::vector<int>& pseudo, const std::vector<int>& truth, int clusters = 2);

/// |mean volume of cluster 0 - mean volume of cluster 1|. Throws InputError if
/// a cluster is empty.
double mean_volume_gap(const std::vector<int>& pseudo, const std::vector<double>& volumes);

/// CSV with header shape_id,pseudo_label,posterior.
void write_pseudo_labels(const std::filesystem::path& path, const PseudoLabeling& labeling);
PseudoLabeling read_pseudo_labels(const std::filesystem::path& path);

}  // namespace shapedis::pseudo
