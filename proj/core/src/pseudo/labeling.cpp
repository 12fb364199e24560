#include "shapedis/pseudo/labeling.hpp"

#include "shapedis/common/error.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

namespace shapedis::pseudo {

PseudoLabeling assign_pseudo_labels(const GaussianMixture& mixture, const RowMatrix& codes,
                                    const std::vector<std::string>& shape_ids,
                                    const std::optional<std::vector<double>>& volumes) {
    if (static_cast<Eigen::Index>(shape_ids.size()) != codes.rows()) {
        throw InputError("assign_pseudo_labels: one shape id per code row required");
    }
    if (mixture.components() != 2) {
        throw InputError("assign_pseudo_labels expects a 2-component mixture");
    }
    const RowMatrix resp = responsibilities(mixture, codes);
    PseudoLabeling out;
    out.shape_ids = shape_ids;
    std::vector<int> comp(shape_ids.size());
    for (Eigen::Index i = 0; i < codes.rows(); ++i) {
        comp[static_cast<std::size_t>(i)] = resp(i, 1) > resp(i, 0) ? 1 : 0;
    }

    std::array<int, 2> map = {0, 1};
    if (volumes) {
        if (volumes->size() != shape_ids.size()) {
            throw InputError("assign_pseudo_labels: one volume per shape required");
        }
        double sum[2] = {0, 0};
        int count[2] = {0, 0};
        for (std::size_t i = 0; i < comp.size(); ++i) {
            sum[comp[i]] += (*volumes)[i];
            ++count[comp[i]];
        }
        if (count[0] > 0 && count[1] > 0 && sum[0] / count[0] < sum[1] / count[1]) {
            map = {1, 0};
        }
        out.cluster_to_class = map;
    }
    for (std::size_t i = 0; i < comp.size(); ++i) {
        out.labels.push_back(map[static_cast<std::size_t>(comp[i])]);
        out.posteriors.push_back(resp(static_cast<Eigen::Index>(i), comp[i]));
    }
    return out;
}

PurityResult cluster_purity(const std::vector<int>& pseudo, const std::vector<int>& truth, int clusters) {
    if (pseudo.size() != truth.size()) {
        throw InputError("cluster_purity: label vectors differ in length");
    }
    std::vector<std::map<int, int>> counts(static_cast<std::size_t>(clusters));
    for (std::size_t i = 0; i < pseudo.size(); ++i) {
        if (pseudo[i] < 0 || pseudo[i] >= clusters) {
            throw InputError("cluster_purity: label out of range");
        }
        ++counts[static_cast<std::size_t>(pseudo[i])][truth[i]];
    }
    PurityResult r;
    double total = 0.0;
    int used = 0;
    for (int c = 0; c < clusters; ++c) {
        const auto& m = counts[static_cast<std::size_t>(c)];
        int size = 0, majority = 0;
        for (const auto& [cls, n] : m) {
            size += n;
            majority = std::max(majority, n);
        }
        if (size == 0) {
            r.empty_clusters.push_back(c);
            continue;
        }
        total += static_cast<double>(majority) / size;
        ++used;
    }
    if (used == 0) throw InputError("cluster_purity: no non-empty cluster");
    r.percent = 100.0 * total / used;
    return r;
}

double mean_volume_gap(const std::vector<int>& pseudo, const std::vector<double>& volumes) {
    if (pseudo.size() != volumes.size()) {
        throw InputError("mean_volume_gap: label and volume vectors differ in length");
    }
    double sum[2] = {0, 0};
    int count[2] = {0, 0};
    for (std::size_t i = 0; i < pseudo.size(); ++i) {
        if (pseudo[i] != 0 && pseudo[i] != 1) throw InputError("mean_volume_gap: labels must be 0/1");
        sum[pseudo[i]] += volumes[i];
        ++count[pseudo[i]];
    }
    if (count[0] == 0 || count[1] == 0) {
        throw InputError("mean_volume_gap: a cluster is empty");
    }
    return std::abs(sum[0] / count[0] - sum[1] / count[1]);
}

void write_pseudo_labels(const std::filesystem::path& path, const PseudoLabeling& l) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    out << "shape_id,pseudo_label,posterior\n";
    out << std::setprecision(17);
    for (std::size_t i = 0; i < l.shape_ids.size(); ++i) {
        out << l.shape_ids[i] << ',' << l.labels[i] << ',' << l.posteriors[i] << '\n';
    }
}

PseudoLabeling read_pseudo_labels(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot read " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "shape_id,pseudo_label,posterior") {
        throw FormatError(path.string() + ": expected header shape_id,pseudo_label,posterior");
    }
    PseudoLabeling l;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string id, label, post;
        if (!std::getline(ss, id, ',') || !std::getline(ss, label, ',') || !std::getline(ss, post)) {
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected 3 fields");
        }
        try {
            const int v = std::stoi(label);
            if (v != 0 && v != 1) throw std::invalid_argument("label");
            l.shape_ids.push_back(id);
            l.labels.push_back(v);
            l.posteriors.push_back(std::stod(post));
        } catch (const std::exception&) {
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": bad label or posterior");
        }
    }
    return l;
}

}  // namespace shapedis::pseudo
