#include "shapedis/eval/report.hpp"

#include "shapedis/common/error.hpp"
#include "shapedis/eval/metrics.hpp"
#include "shapedis/geometry/chamfer.hpp"

#include "json.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

namespace shapedis::eval {

using nlohmann::ordered_json;

namespace {

std::vector<double> column(const RowMatrix& m, int c) {
    std::vector<double> v(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) v[static_cast<std::size_t>(i)] = m(i, c);
    return v;
}

struct SplitRows {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

SplitRows split_rows(const LatentTable& t) {
    SplitRows s;
    std::vector<std::size_t> val;
    for (std::size_t i = 0; i < t.splits.size(); ++i) {
        switch (t.splits[i]) {
            case geometry::Split::Train: s.train.push_back(i); break;
            case geometry::Split::Test: s.test.push_back(i); break;
            case geometry::Split::Val: val.push_back(i); break;
        }
    }
    if (s.test.empty()) s.test = val;
    return s;
}

template <class T>
std::vector<double> pick(const std::vector<T>& v, const std::vector<std::size_t>& rows) {
    std::vector<double> out;
    out.reserve(rows.size());
    for (auto r : rows) out.push_back(static_cast<double>(v[r]));
    return out;
}

SplitScores knn_scores(const std::vector<double>& x, const std::vector<double>& y, const SplitRows& rows,
                       KnnMode mode, int k) {
    SplitScores s;
    if (rows.train.empty()) return s;
    const auto tx = pick(x, rows.train), ty = pick(y, rows.train);
    s.train = knn_predict(tx, ty, tx, ty, mode, k).score;
    if (!rows.test.empty()) s.test = knn_predict(tx, ty, pick(x, rows.test), pick(y, rows.test), mode, k).score;
    return s;
}

double safe_pearson(const std::vector<double>& x, const std::vector<double>& y) {
    try {
        return pearson_corr(x, y);
    } catch (const InputError&) {
        return std::nan("");
    }
}

ordered_json factor_json(const FactorMetrics& f, const char* knn_name) {
    ordered_json j;
    j["sap"] = f.sap;
    j["sap_top_dim"] = f.sap_top_dim;
    j["sap_scores"] = f.sap_scores;
    j["pearson"] = f.pearson;
    j[knn_name] = {{"train", f.knn.train}, {"test", f.knn.test}};
    return j;
}

}  // namespace

LatentMetrics evaluate_latents(const LatentTable& t, const EvaluationOptions& o) {
    const auto n = static_cast<std::size_t>(t.latents.rows());
    if (t.disease.size() != n || t.age_norm.size() != n || t.splits.size() != n) {
        throw InputError("evaluate_latents: covariates do not match latent rows");
    }
    if (o.disease_coord >= t.latents.cols() || o.age_coord >= t.latents.cols()) {
        throw InputError("evaluate_latents: designated coordinate out of range");
    }
    const std::vector<double> disease(t.disease.begin(), t.disease.end());
    const auto zd = column(t.latents, o.disease_coord);
    const auto za = column(t.latents, o.age_coord);
    const auto rows = split_rows(t);

    LatentMetrics m;
    const auto sd = sap_score(t.latents, disease, FactorKind::Binary);
    m.disease.sap = sd.sap;
    m.disease.sap_top_dim = sd.top_dim;
    m.disease.sap_scores = sd.scores;
    m.disease.pearson = safe_pearson(zd, disease);
    m.disease.knn = knn_scores(zd, disease, rows, KnnMode::Classify, o.k_neighbors);

    const auto sa = sap_score(t.latents, t.age_norm, FactorKind::Continuous);
    m.age.sap = sa.sap;
    m.age.sap_top_dim = sa.top_dim;
    m.age.sap_scores = sa.scores;
    m.age.pearson = safe_pearson(za, t.age_norm);
    m.age.knn = knn_scores(za, t.age_norm, rows, KnnMode::Regress, o.k_neighbors);
    return m;
}

ReconstructionStats reconstruction_report(stage2::FrozenRenderer& renderer, const torch::Tensor& codes,
                                          const CodeMap& code_map,
                                          const std::vector<geometry::TriangleMesh>& truth,
                                          const ReconstructionOptions& o) {
    if (codes.size(0) != static_cast<std::int64_t>(truth.size())) {
        throw InputError("reconstruction_report: codes and meshes differ in count");
    }
    torch::Tensor mapped;
    {
        torch::NoGradGuard ng;
        mapped = code_map(codes);
    }
    const auto opts = geometry::MeshingOptions::for_metrics(o.resolution);
    ReconstructionStats s;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const auto idx = static_cast<std::int64_t>(i);
        const auto a = renderer.render(codes[idx], opts);
        const auto b = renderer.render(mapped[idx], opts);
        if (a.empty() || b.empty() || truth[i].empty()) {
            s.excluded.push_back(truth[i].shape_id);
            continue;
        }
        s.stage1_per_shape.push_back(geometry::chamfer_distance(truth[i], a, o.n_points, o.seed));
        s.per_shape.push_back(geometry::chamfer_distance(truth[i], b, o.n_points, o.seed));
    }
    auto mean = [](const std::vector<double>& v) {
        return v.empty() ? std::nan("") : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    };
    s.mean_cd = mean(s.per_shape);
    s.stage1_mean_cd = mean(s.stage1_per_shape);
    return s;
}

MeanStd mean_std(const std::vector<double>& v) {
    MeanStd r;
    if (v.empty()) return r;
    r.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - r.mean) * (x - r.mean);
    r.std = std::sqrt(ss / static_cast<double>(v.size()));
    return r;
}

std::string to_json(const MetricsReport& r) {
    ordered_json j;
    j["config_hash"] = r.config_hash;
    j["variant"] = r.variant;
    std::vector<std::uint64_t> seeds;
    ordered_json per_seed = ordered_json::array();
    std::vector<double> dsap, asap, dacc, armse, cds;
    for (const auto& s : r.seeds) {
        seeds.push_back(s.seed);
        ordered_json e;
        e["seed"] = s.seed;
        e["disease"] = factor_json(s.metrics.disease, "knn_accuracy");
        e["age"] = factor_json(s.metrics.age, "knn_rmse");
        if (s.recon_cd) e["recon_cd"] = *s.recon_cd;
        per_seed.push_back(e);
        dsap.push_back(s.metrics.disease.sap);
        asap.push_back(s.metrics.age.sap);
        dacc.push_back(s.metrics.disease.knn.test);
        armse.push_back(s.metrics.age.knn.test);
        if (s.recon_cd) cds.push_back(*s.recon_cd);
    }
    j["seeds"] = seeds;
    j["per_seed"] = per_seed;
    auto ms = [](const std::vector<double>& v) {
        const auto m = mean_std(v);
        return ordered_json{{"mean", m.mean}, {"std", m.std}};
    };
    ordered_json mean;
    mean["disease_sap"] = ms(dsap);
    mean["age_sap"] = ms(asap);
    mean["disease_knn_accuracy_test"] = ms(dacc);
    mean["age_knn_rmse_test"] = ms(armse);
    if (!cds.empty()) mean["recon_cd"] = ms(cds);
    j["mean"] = mean;
    if (r.purity) j["purity"] = *r.purity;
    if (r.volume_gap) j["volume_gap"] = *r.volume_gap;
    if (r.stage1_cd) j["stage1_cd"] = *r.stage1_cd;
    j["recon_excluded"] = r.recon_excluded;
    return j.dump(2) + "\n";
}

void write_metrics_report(const std::filesystem::path& path, const MetricsReport& report) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    out << to_json(report);
}

std::string format_number(double value, int precision) {
    if (!std::isfinite(value)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", precision, value);
    return buf;
}

void write_csv(const std::filesystem::path& path, const Table& table) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            const bool quote = cells[i].find_first_of(",\"\n") != std::string::npos;
            if (i) out << ',';
            if (!quote) {
                out << cells[i];
                continue;
            }
            out << '"';
            for (char c : cells[i]) out << (c == '"' ? "\"\"" : std::string(1, c));
            out << '"';
        }
        out << '\n';
    };
    line(table.columns);
    for (const auto& r : table.rows) line(r);
}

}  // namespace shapedis::eval
