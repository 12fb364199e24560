// Runs the ten acceptance criteria and prints one PASS/FAIL line each.
// Usage: acceptance [criterion numbers...]   (default: all)
// SHAPEDIS_ACCEPTANCE_DIR keeps the run directories (default: a temp dir).

#include "shapedis/common/error.hpp"
#include "shapedis/common/hash.hpp"
#include "shapedis/common/rng.hpp"
#include "shapedis/common/tensor.hpp"
#include "shapedis/eval/metrics.hpp"
#include "shapedis/eval/sweep.hpp"
#include "shapedis/geometry/analytic_shape.hpp"
#include "shapedis/geometry/chamfer.hpp"
#include "shapedis/geometry/marching_cubes.hpp"
#include "shapedis/geometry/mesh_ops.hpp"
#include "shapedis/pipeline/commands.hpp"
#include "shapedis/pipeline/reproduce.hpp"
#include "shapedis/pseudo/gmm_em.hpp"
#include "shapedis/pseudo/labeling.hpp"
#include "shapedis/stage1/checkpoint.hpp"
#include "shapedis/stage1/decoder.hpp"
#include "shapedis/stage1/losses.hpp"
#include "shapedis/stage2/checkpoint.hpp"
#include "shapedis/stage2/losses.hpp"
#include "shapedis/stage2/trainer.hpp"

#include "test_support.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

using namespace shapedis;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v, int precision = 4) {
    std::ostringstream s;
    s << std::setprecision(precision) << v;
    return s.str();
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw DependencyError("missing " + p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

testref::Batch to_batch(const torch::Tensor& t) {
    const auto c = t.to(torch::kFloat64).contiguous();
    testref::Batch out(c.size(0), std::vector<double>(c.size(1)));
    const double* p = c.data_ptr<double>();
    for (int64_t i = 0; i < c.size(0); ++i) {
        for (int64_t j = 0; j < c.size(1); ++j) out[i][j] = p[i * c.size(1) + j];
    }
    return out;
}

// Shared desk-scale runs, created on first use.
class Desk {
public:
    explicit Desk(fs::path root) : root_(std::move(root)) {}

    pipeline::CommandOptions options(const std::string& id) const {
        pipeline::CommandOptions o;
        o.runs_root = root_;
        o.run_id = id;
        o.log = &std::cerr;
        return o;
    }

    // make-data + train-stage1 + cluster with the given stage-1 loss weights.
    const pipeline::CommandOptions& stage1_run(const std::string& id, double lambda_eik, double lambda_gmm) {
        auto it = done_.find(id);
        if (it != done_.end()) return it->second;
        auto cfg = pipeline::desk_config();
        cfg.stage1.lambda_eik = lambda_eik;
        cfg.stage1.lambda_gmm = lambda_gmm;
        auto o = options(id);
        o.force = true;
        o.config = cfg;
        pipeline::cmd_make_data(o);
        auto s = options(id);
        pipeline::cmd_train_stage1(s);
        pipeline::cmd_cluster(s);
        return done_.emplace(id, s).first->second;
    }

    const pipeline::CommandOptions& full() {
        const auto d = pipeline::desk_config();
        return stage1_run("desk-full", d.stage1.lambda_eik, d.stage1.lambda_gmm);
    }

    // train-stage2 + eval for one ablation on the full run, once.
    json variant(const std::string& ablation) {
        auto o = full();
        o.ablation = ablation;
        if (!trained_.count(ablation)) {
            const auto reference = renderer_reference();
            pipeline::cmd_train_stage2(o);
            check_renderer(ablation, reference);
            pipeline::cmd_eval(o);
            trained_.insert(ablation);
        }
        return json::parse(slurp(o.run_dir() / "eval" / ablation / "metrics.json"));
    }

    fs::path run_dir(const std::string& id) const { return root_ / id; }

    // Parameter hash of the stage-1 decoder stored in the checkpoint, plus the file hash.
    std::pair<std::string, std::string> renderer_reference() {
        const auto path = full().run_dir() / "stage1/checkpoint.s1ckpt";
        auto state = stage1::load_stage1_checkpoint(path);
        return {parameter_hash(*state.model.decoder), sha256_file(path)};
    }

    void check_renderer(const std::string& what, const std::pair<std::string, std::string>& before) {
        const auto after = renderer_reference();
        bool same = after == before;
        const auto dir = full().run_dir() / "stage2" / what;
        if (fs::exists(dir)) {
            for (const auto& e : fs::directory_iterator(dir)) {
                if (e.path().extension() != ".s2ckpt") continue;
                same = same && stage2::load_stage2_checkpoint(e.path()).model.renderer_checksum == before.first;
                ++renderer_checks;
            }
        }
        renderer_log.push_back({what, same});
    }

    std::vector<std::pair<std::string, bool>> renderer_log;
    int renderer_checks = 0;

private:
    fs::path root_;
    std::map<std::string, pipeline::CommandOptions> done_;
    std::set<std::string> trained_;
};

// ---------------------------------------------------------------------------

Outcome criterion_loss_oracles() {
    std::mt19937_64 gen(2024);
    torch::manual_seed(2024);
    double worst = 0.0;
    auto note = [&](double got, double ref) { worst = std::max(worst, std::abs(got - ref)); };
    const int k = 8;
    for (int t = 0; t < 50; ++t) {
        const int b = 2 + static_cast<int>(gen() % 15);
        const int d = 9 + static_cast<int>(gen() % 56);
        const auto opt = torch::kFloat64;

        const auto z = torch::randn({b, k}, opt);
        const auto lv = torch::randn({b, k}, opt);
        note(stage2::kl_loss(z, lv).item<double>(), testref::kl_reference(to_batch(z), to_batch(lv)));

        const auto a = torch::randn({b, d}, opt), c = torch::randn({b, d}, opt);
        note(stage2::code_recon_loss(a, c).item<double>(), testref::mse_reference(to_batch(a), to_batch(c)));

        note(stage2::cov_loss(z).item<double>(), testref::cov_reference(to_batch(z)));

        std::vector<double> y(b);
        std::vector<bool> mask(b);
        std::vector<int64_t> mask_i(b);
        const bool binary = t % 2 == 0;
        for (int i = 0; i < b; ++i) {
            y[i] = binary ? static_cast<double>(gen() % 2) : static_cast<double>(gen() % 21) / 20.0;
            mask[i] = mask_i[i] = t % 4 == 0 ? gen() % 3 != 0 : true;
        }
        stage2::SnnlOptions so;
        so.coord = static_cast<int>(gen() % k);
        so.threshold = binary ? 0.0 : 0.05;
        const double temp = stage2::adaptive_temperature(z.select(1, so.coord)).item<double>();
        note(stage2::snnl_loss(z, torch::tensor(y, opt), torch::tensor(mask_i).to(torch::kBool), so,
                               torch::full({}, temp, opt))
                 .item<double>(),
             testref::snnl_reference(to_batch(z), y, mask, so.coord, so.threshold, so.lambda1, so.lambda2, temp));

        const auto w1 = torch::randn({k, 16}, opt) * 0.4, w2 = torch::randn({16, d}, opt) * 0.4;
        const stage2::LatentDecoder dec = [&](const torch::Tensor& x) { return torch::tanh(x.mm(w1)).mm(w2); };
        const auto w1b = to_batch(w1), w2b = to_batch(w2);
        const testref::VecMap ref = [&](const std::vector<double>& x) {
            std::vector<double> h(16, 0.0), out(d, 0.0);
            for (int j = 0; j < 16; ++j) {
                for (int i = 0; i < k; ++i) h[j] += x[i] * w1b[i][j];
                h[j] = std::tanh(h[j]);
            }
            for (int j = 0; j < d; ++j) {
                for (int i = 0; i < 16; ++i) out[j] += h[i] * w2b[i][j];
            }
            return out;
        };
        const int cc = static_cast<int>(gen() % k);
        const double eta = t % 3 == 0 ? 50.0 : 0.02;
        note(stage2::dis_sen_loss(z * 0.3, dec, cc, 0.02, eta).total.item<double>(),
             testref::dis_sen_reference(to_batch(z * 0.3), ref, cc, 0.02, eta));

        const auto codes = torch::randn({b, d}, opt);
        const double w0 = 0.1 + 0.8 * static_cast<double>(gen() % 100) / 100.0;
        const auto mu = torch::randn({2, d}, opt) * 0.5;
        const auto var = torch::rand({2, d}, opt) + 0.5;
        note(stage1::gmm_prior_loss(codes, torch::tensor({w0, 1 - w0}, opt), mu, var).item<double>(),
             testref::gmm_nll_reference(to_batch(codes), {w0, 1 - w0}, to_batch(mu), to_batch(var)));
    }
    return {worst <= 1e-6, "max |lib - oracle| = " + fmt(worst, 3) + " over 50 batches x 6 losses (tol 1e-6)"};
}

// Relative error ||a - b|| / ||b||.
double rel_error(const torch::Tensor& a, const torch::Tensor& b) {
    return (a.to(torch::kFloat64) - b.to(torch::kFloat64)).norm().item<double>() /
           std::max(b.to(torch::kFloat64).norm().item<double>(), 1e-12);
}

Outcome criterion_gradients() {
    double worst_dec = 0.0, worst_total = 0.0;
    for (int t = 0; t < 10; ++t) {
        torch::manual_seed(100 + t);
        stage1::DecoderConfig dc;
        dc.latent_dim = 8 + 8 * (t % 3);
        dc.hidden = {64, 64, 64, 64};
        dc.skip_layer = 2;
        stage1::SdfDecoder dec(dc);
        {
            torch::NoGradGuard g;
            for (auto& p : dec->parameters()) p.add_(torch::randn_like(p) * 0.05);
        }
        const auto points = torch::rand({16, 3}) * 1.6 - 0.8;
        const auto codes = torch::randn({16, dc.latent_dim}) * 0.3;
        const auto analytic = stage1::points_gradient(dec, points, codes, false);

        // Central differences on a float64 copy of the same network.
        stage1::SdfDecoder ref(dc);
        module_from_bytes(*ref, module_to_bytes(*dec));
        ref->to(torch::kFloat64);
        torch::NoGradGuard g;
        const auto p64 = points.to(torch::kFloat64), c64 = codes.to(torch::kFloat64);
        auto fd = torch::zeros({16, 3}, torch::kFloat64);
        const double h = 1e-5;
        for (int axis = 0; axis < 3; ++axis) {
            auto e = torch::zeros({1, 3}, torch::kFloat64);
            e[0][axis] = h;
            fd.select(1, axis).copy_((ref->forward(p64 + e, c64) - ref->forward(p64 - e, c64)) / (2 * h));
        }
        worst_dec = std::max(worst_dec, rel_error(analytic, fd));
    }

    for (int t = 0; t < 10; ++t) {
        torch::manual_seed(200 + t);
        const int d = 16, k = 8, n = 12;
        stage1::DecoderConfig dc;
        dc.latent_dim = d;
        dc.hidden = {32, 32, 32};
        dc.skip_layer = 1;
        dc.softplus_beta = 10.0;
        stage1::SdfDecoder dec(dc);
        stage2::FrozenRenderer renderer(dec);
        stage2::Stage2Config cfg;
        cfg.vae.input_dim = d;
        cfg.vae.latent_dim = k;
        cfg.vae.encoder_hidden = {32, 16};
        cfg.vae.decoder_hidden = {16, 32};
        cfg.sdf_points = 16;
        cfg.lambda_cov = 0.1 + 0.1 * t;
        cfg.eta = t % 2 == 0 ? 0.02 : 10.0;  // sensitivity hinge inactive / active
        cfg.temperature = stage2::TemperatureMode::Fixed;
        cfg.fixed_temperature = 0.2 + 0.1 * t;
        cfg.snnl_on_means = t % 3 == 0;
        stage2::Stage2Data data;
        data.codes = torch::randn({n, d}) * 0.3;
        for (int i = 0; i < n; ++i) {
            data.shape_ids.push_back("s" + std::to_string(i));
            data.disease.push_back({stage2::LabelSource::Pseudo, i % 2});
            data.age_norm.push_back(static_cast<double>((i * 7) % n) / (n - 1));
            geometry::AnalyticShape s;
            s.base_radius = 0.4 + 0.02 * i;
            geometry::SamplingOptions so;
            so.count = 128;
            so.surface_resolution = 20;
            so.seed = t * 100 + i;
            data.samples.push_back(geometry::sample_shape(s, so));
        }
        stage2::Stage2Trainer trainer(data, cfg, renderer);
        const std::vector<int> rows = {0, 1, 2, 3, 4, 5, 6, 7};
        const auto post = trainer.encode_rows(rows);
        auto mean = post.mean.detach().clone().requires_grad_(true);
        const auto logvar = post.logvar.detach();
        const auto noise = torch::zeros_like(mean);
        const auto batch = trainer.make_sdf_batch(rows, t);
        trainer.objective(rows, {mean, logvar}, noise, batch).total.backward();
        const auto analytic = mean.grad().clone();
        auto fd = torch::zeros_like(analytic);
        const float h = 1e-3f;
        torch::NoGradGuard g;
        for (int i = 0; i < 8; ++i) {
            for (int j = 0; j < k; ++j) {
                auto up = mean.detach().clone(), down = mean.detach().clone();
                up[i][j] += h;
                down[i][j] -= h;
                fd[i][j] = (trainer.objective(rows, {up, logvar}, noise, batch).total -
                            trainer.objective(rows, {down, logvar}, noise, batch).total) /
                           (2 * h);
            }
        }
        worst_total = std::max(worst_total, rel_error(analytic, fd));
        renderer.verify();
    }
    const bool pass = worst_dec <= 1e-3 && worst_total <= 1e-2;
    return {pass, "decoder dG/dp rel err " + fmt(worst_dec, 3) + " (tol 1e-3); objective d/dmu rel err " +
                      fmt(worst_total, 3) + " (tol 1e-2); 10 configs each"};
}

Outcome criterion_geometry() {
    geometry::AnalyticShape sphere;
    sphere.kind = geometry::ShapeKind::Sphere;
    sphere.base_radius = 1.0;
    const geometry::AnalyticField field(sphere);
    auto opts = geometry::MeshingOptions::for_metrics(64);
    opts.bound = 1.2;
    const auto mesh = geometry::extract_mesh([&](const geometry::Vec3& p) { return field(p); }, opts);
    const double voxel = 2.0 * opts.bound / (opts.resolution - 1);
    double worst = 0.0;
    for (Eigen::Index i = 0; i < mesh.vertices.rows(); ++i) {
        worst = std::max(worst, std::abs(mesh.vertices.row(i).norm() - 1.0));
    }
    const double vol = geometry::mesh_volume(mesh).volume;
    const double exact = 4.0 * std::numbers::pi / 3.0;
    const double vol_err = std::abs(vol - exact) / exact;

    Rng rng(77);
    double cd_err = 0.0;
    for (int t = 0; t < 20; ++t) {
        geometry::PointSet a(100, 3), b(100, 3);
        std::vector<std::array<double, 3>> ra, rb;
        for (int i = 0; i < 100; ++i) {
            a.row(i) << rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1);
            b.row(i) << rng.normal(), rng.normal(), rng.normal();
            ra.push_back({a(i, 0), a(i, 1), a(i, 2)});
            rb.push_back({b(i, 0), b(i, 1), b(i, 2)});
        }
        cd_err = std::max(cd_err, std::abs(geometry::chamfer_distance(a, b) - testref::chamfer_reference(ra, rb)));
    }
    const bool pass = !mesh.empty() && worst <= 1.5 * voxel && vol_err <= 0.05 && cd_err <= 1e-9;
    return {pass, "max vertex residual " + fmt(worst / voxel, 3) + " voxels (tol 1.5); volume err " +
                      fmt(100 * vol_err, 3) + "% (tol 5%); chamfer vs O(n^2) " + fmt(cd_err, 3) + " (tol 1e-9)"};
}

Outcome criterion_em() {
    std::mt19937_64 gen(5);
    bool monotone = true;
    for (int t = 0; t < 30; ++t) {
        const int n = 4 + static_cast<int>(gen() % 100), d = 1 + static_cast<int>(gen() % 10);
        std::normal_distribution<double> nd;
        RowMatrix x(n, d);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < d; ++j) x(i, j) = nd(gen) * (j + 1) + (t % 3 == 0 && i % 2 ? 1.5 : 0.0);
        }
        if (t % 10 == 9) x.setConstant(0.25);
        pseudo::EmOptions o;
        o.seed = t;
        o.restarts = 3;
        const auto r = pseudo::fit_gmm_em(x, o);
        for (std::size_t i = 1; i < r.log_likelihood.size(); ++i) {
            monotone = monotone && r.log_likelihood[i] >= r.log_likelihood[i - 1] - 1e-9;
        }
    }
    const double sigma = 0.5;
    std::normal_distribution<double> nd(0.0, sigma);
    RowMatrix x(200, 2);
    std::vector<int> truth(200);
    for (int i = 0; i < 200; ++i) {
        truth[i] = i % 2;
        x(i, 0) = (truth[i] ? 3.0 : -3.0) * sigma + nd(gen);
        x(i, 1) = nd(gen);
    }
    const auto r = pseudo::fit_gmm_em(x);
    std::vector<std::string> ids(200, "s");
    const auto labels = pseudo::assign_pseudo_labels(r.mixture, x, ids);
    const double purity = pseudo::cluster_purity(labels.labels, truth).percent;
    return {monotone && purity >= 99.0, "log-likelihood monotone on 30 inputs: " + std::string(monotone ? "yes" : "no") +
                                            "; purity on 6-sigma blobs " + fmt(purity, 5) + "% (need >= 99)"};
}

json cluster_report(const pipeline::CommandOptions& o) {
    return json::parse(slurp(o.run_dir() / "cluster/report.json"));
}

Outcome criterion_stage1(Desk& desk) {
    const auto full = cluster_report(desk.full());
    const auto rec = cluster_report(desk.stage1_run("desk-rec_l2", 0.0, 0.0));
    const double pf = full.value("purity", 0.0), pr = rec.value("purity", 0.0);
    const double gap = full.value("volume_gap", 0.0);
    const bool pass = pf >= 90.0 && gap > 0.0 && pf >= pr;
    return {pass, "purity full " + fmt(pf, 5) + "% (need >= 90), Rec+l2 " + fmt(pr, 5) + "%; volume gap " + fmt(gap, 4) +
                      " (need > 0)"};
}

double mean_of(const json& metrics, const char* key) { return metrics["mean"][key]["mean"].get<double>(); }

Outcome criterion_stage2(Desk& desk) {
    const auto full = desk.variant("full");
    const auto reduced = desk.variant("no_disentangle");
    const auto no_cov = desk.variant("no_cov");
    const double sf = mean_of(full, "disease_sap"), sr = mean_of(reduced, "disease_sap"),
                 sc = mean_of(no_cov, "disease_sap");
    const double cf = mean_of(full, "recon_cd"), cr = mean_of(reduced, "recon_cd");
    const bool a = sf >= sr + 0.05, b = sc <= sf, c = cf <= 1.5 * cr;
    return {a && b && c, "disease SAP full " + fmt(sf, 3) + " vs reduced " + fmt(sr, 3) + " (need gap >= 0.05: " +
                             (a ? "ok" : "no") + "); w/o cov " + fmt(sc, 3) + " (need <= full: " + (b ? "ok" : "no") +
                             "); CD full " + fmt(cf, 3) + " vs reduced " + fmt(cr, 3) + " (need <= 1.5x: " +
                             (c ? "ok" : "no") + ")"};
}

Outcome criterion_label_mixing(Desk& desk) {
    auto setup = pipeline::load_sweep_setup(desk.full());
    stage2::FrozenRenderer renderer(setup.decoder);
    const auto reference = renderer.checksum();
    bool intact = true;
    int checks = 0;
    const eval::SweepGate gate = [&](const eval::SweepCell&) {
        intact = intact && renderer.current_checksum() == reference;
        ++checks;
        return true;
    };
    using stage2::LabelPolicy;
    const auto pseudo = eval::label_mixing_sweep(setup.inputs, renderer, {0.0}, {LabelPolicy::RealPlusPseudo},
                                                 setup.seeds, gate);
    const std::vector<double> fractions = {0.1, 0.3, 0.6, 1.0};
    const auto none = eval::label_mixing_sweep(setup.inputs, renderer, fractions, {LabelPolicy::RealPlusNone},
                                               setup.seeds, gate);
    intact = intact && renderer.current_checksum() == reference;
    desk.renderer_log.push_back({"label sweep (" + std::to_string(checks) + " runs)", intact});
    desk.renderer_checks += checks;

    const auto* p0 = pseudo.find(0.0, LabelPolicy::RealPlusPseudo);
    std::vector<const eval::SweepSummary*> rows;
    for (double f : fractions) rows.push_back(none.find(f, LabelPolicy::RealPlusNone));
    for (const auto* r : rows) {
        if (!r) return {false, "sweep cell missing"};
    }
    const bool gap = p0->mean >= rows[1]->mean;
    bool monotone = true;
    std::string series;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        series += (i ? ", " : "") + fmt(rows[i]->mean, 3) + "+-" + fmt(rows[i]->std, 2);
        if (i > 0) {
            const double slack = std::max(rows[i - 1]->std, rows[i]->std);
            monotone = monotone && rows[i]->mean >= rows[i - 1]->mean - slack;
        }
    }
    return {gap && monotone, "pseudo@0% " + fmt(p0->mean, 3) + " vs none@30% " + fmt(rows[1]->mean, 3) +
                                 " (need >=: " + (gap ? "ok" : "no") + "); none@10/30/60/100%: " + series +
                                 " (non-decreasing within 1 std: " + (monotone ? "ok" : "no") + ")"};
}

Outcome criterion_traversal(Desk& desk) {
    desk.variant("full");
    auto o = desk.full();
    o.ablation = "full";
    pipeline::cmd_traverse(o);
    std::ifstream in(o.run_dir() / "traversals/full/volumes.csv");
    std::string line;
    std::getline(in, line);
    std::vector<double> values, volumes;
    bool any_empty = false;
    while (std::getline(in, line)) {
        std::stringstream ss(line);
        std::string series, idx, dv, av, vol, empty;
        std::getline(ss, series, ',');
        std::getline(ss, idx, ',');
        std::getline(ss, dv, ',');
        std::getline(ss, av, ',');
        std::getline(ss, vol, ',');
        std::getline(ss, empty, ',');
        if (series != "disease") continue;
        values.push_back(std::stod(dv));
        volumes.push_back(std::stod(vol));
        any_empty = any_empty || empty == "1";
    }
    if (volumes.size() != 7) return {false, "expected 7 traversal points, got " + std::to_string(volumes.size())};
    double rho = 0.0;
    try {
        rho = eval::spearman_corr(values, volumes);
    } catch (const InputError&) {
        rho = 0.0;
    }
    const double hi = std::max(volumes.front(), volumes.back()), lo = std::min(volumes.front(), volumes.back());
    const double change = hi > 0 ? (hi - lo) / hi : 0.0;
    const bool pass = !any_empty && std::abs(rho) >= 0.9 && change >= 0.2;
    return {pass, "Spearman rho " + fmt(rho, 3) + " (need |rho| >= 0.9); end-to-end volume change " +
                      fmt(100 * change, 3) + "% (need >= 20%)" + (any_empty ? "; empty mesh in series" : "")};
}

Outcome criterion_frozen_renderer(Desk& desk) {
    // Criteria 6 and 7 record a check around every stage-2 run; make sure they happened.
    if (desk.renderer_log.empty()) {
        desk.variant("full");
    }
    bool all = true;
    std::string which;
    for (const auto& [name, ok] : desk.renderer_log) {
        all = all && ok;
        which += (which.empty() ? "" : ", ") + name + (ok ? "" : " CHANGED");
    }
    return {all && desk.renderer_checks > 0,
            std::to_string(desk.renderer_checks) + " stage-2 models checked against the stage-1 parameter hash: " + which};
}

Outcome criterion_determinism(const fs::path& root) {
    const char* cfg_text = R"(seed = 11
[geometry]
n = 24
samples = 2048
surface_resolution = 32
mesh_resolution = 32
[stage1]
latent_dim = 16
hidden = [64, 64, 64, 64]
epochs = 10
points_per_step = 128
[stage2]
latent_dim = 4
encoder_hidden = [32, 16]
decoder_hidden = [16, 32]
epochs = 10
sdf_points = 32
seeds = [0, 1]
[eval]
cd_points = 2000
recon_resolution = 24
recon_shapes = 4
)";
    std::vector<std::string> reports;
    for (const char* id : {"det-a", "det-b"}) {
        pipeline::CommandOptions o;
        o.runs_root = root;
        o.run_id = id;
        o.force = true;
        o.config = pipeline::parse_config(cfg_text);
        pipeline::cmd_make_data(o);
        o.config.reset();
        o.force = false;
        pipeline::cmd_train_stage1(o);
        pipeline::cmd_cluster(o);
        pipeline::cmd_train_stage2(o);
        pipeline::cmd_eval(o);
        reports.push_back(slurp(root / id / "eval/full/metrics.json"));
    }
    const bool same = reports[0] == reports[1];
    return {same, "metrics.json of two deterministic runs: " + std::to_string(reports[0].size()) + " bytes, " +
                      (same ? "byte-identical" : "DIFFERENT")};
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
    const bool all = selected.empty();

    fs::path root;
    if (const char* env = std::getenv("SHAPEDIS_ACCEPTANCE_DIR"); env && *env) {
        root = env;
    } else {
        root = fs::temp_directory_path() / "shapedis_acceptance";
        fs::remove_all(root);
    }
    fs::create_directories(root);
    set_deterministic(0);
    Desk desk(root);

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"loss oracles", criterion_loss_oracles},
        {"gradient checks", criterion_gradients},
        {"geometry", criterion_geometry},
        {"EM properties", criterion_em},
        {"stage-1 end to end", [&] { return criterion_stage1(desk); }},
        {"stage-2 end to end", [&] { return criterion_stage2(desk); }},
        {"label mixing trend", [&] { return criterion_label_mixing(desk); }},
        {"traversal control", [&] { return criterion_traversal(desk); }},
        {"frozen renderer", [&] { return criterion_frozen_renderer(desk); }},
        {"determinism", [&] { return criterion_determinism(root); }},
    };

    int failed = 0;
    std::vector<std::string> lines;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!all && !selected.count(id)) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = criteria[i].second();
        } catch (const std::exception& e) {
            out = {false, std::string("error: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::ostringstream line;
        line << (out.pass ? "[PASS] " : "[FAIL] ") << id << ". " << criteria[i].first << ": " << out.detail << " ("
             << std::fixed << std::setprecision(1) << secs << " s)";
        std::cout << line.str() << std::endl;
        lines.push_back(line.str());
        failed += out.pass ? 0 : 1;
    }
    std::cout << "\nsummary:\n";
    for (const auto& l : lines) std::cout << "  " << l << "\n";
    std::cout << (lines.size() - failed) << "/" << lines.size() << " criteria passed" << std::endl;
    return failed == 0 ? 0 : 1;
}
