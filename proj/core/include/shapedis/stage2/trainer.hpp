#pragma once

#include "shapedis/common/tensor.hpp"
#include "shapedis/geometry/sampling.hpp"
#include "shapedis/stage2/losses.hpp"
#include "shapedis/stage2/renderer.hpp"
#include "shapedis/stage2/vae.hpp"

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace shapedis::stage2 {

enum class LabelSource { Real, Pseudo, None };

struct DiseaseLabel {
    LabelSource source = LabelSource::None;
    int value = 0;
    bool labeled() const { return source != LabelSource::None; }
};

enum class LabelPolicy { RealPlusPseudo, RealPlusNone };

std::string_view to_string(LabelPolicy policy);

/// Gives round(fraction * N) randomly chosen shapes their real label and the
/// rest a pseudo label (RealPlusPseudo) or none (RealPlusNone). When some real
/// labels are present, pseudo labels are flipped if that agrees better with
/// them. Throws InputError on a fraction outside [0, 1] or size mismatch.
std::vector<DiseaseLabel> mix_labels(const std::vector<int>& truth, const std::vector<int>& pseudo,
                                     double real_fraction, LabelPolicy policy, std::uint64_t seed);

enum class TemperatureMode { Adaptive, Fixed };

struct Stage2Config {
    VaeConfig vae;
    int disease_coord = 0;
    int age_coord = 1;
    double lambda_code = 0.44;
    double beta = 0.008;
    double lambda_snnl = 0.77;
    double lambda1 = 0.5;
    double lambda2 = 0.5;
    double lambda_cov = 0.007;
    double lambda_dis_sen = 0.56;
    double lambda_sdf = 1.0;
    double th_disease = 0.0;
    double th_age = 0.05;
    double eps = 0.02;
    double eta = 0.02;
    TemperatureMode temperature = TemperatureMode::Adaptive;
    double fixed_temperature = 1.0;
    int epochs = 500;
    int batch = 32;
    int sdf_points = 2048;  // pass-through samples per shape per step
    double sdf_clamp = 0.1;
    bool sdf_eikonal = false;
    double lambda_sdf_eikonal = 1e-4;
    bool snnl_on_means = false;  // SNNL / cov on posterior means instead of samples
    std::vector<int> dis_sen_coords = {0};
    double lr = 1e-3;
    double grad_clip = 0.0;  // 0 disables
    std::uint64_t seed = 0;

    /// Throws ConfigError on invalid coordinates or negative weights.
    void validate() const;
};

struct Stage2Data {
    std::vector<std::string> shape_ids;
    torch::Tensor codes;  // [N, d] stage-1 codes (treated as constants)
    std::vector<DiseaseLabel> disease;
    std::vector<double> age_norm;
    /// Stage-1 samples per shape, required when lambda_sdf > 0.
    std::vector<geometry::SampleSet> samples;
};

struct Stage2Terms {
    torch::Tensor total;
    torch::Tensor code;
    torch::Tensor kl;
    torch::Tensor snnl;
    torch::Tensor snnl_disease;
    torch::Tensor snnl_age;
    torch::Tensor cov;
    torch::Tensor dis_sen;
    torch::Tensor sdf;
    torch::Tensor alpha;  // sensitivity of the first dis_sen coordinate
};

struct Stage2EpochLog {
    int epoch = 0;
    double total = 0.0;
    double code = 0.0;
    double kl = 0.0;
    double snnl = 0.0;
    double cov = 0.0;
    double dis_sen = 0.0;
    double sdf = 0.0;
};

struct SdfBatch {
    torch::Tensor points;  // [n, 3]
    torch::Tensor sdf;     // [n]
    torch::Tensor owner;   // [n] position within the batch
};

struct Stage2Model {
    CodeVae vae{nullptr};
    Stage2Config config;
    int epoch = 0;
    std::string renderer_checksum;  // stage-1 decoder parameter hash
};

class Stage2Trainer {
public:
    /// Throws InputError on inconsistent data (sizes, missing samples, code
    /// length different from the renderer's latent size).
    Stage2Trainer(Stage2Data data, Stage2Config cfg, FrozenRenderer& renderer);

    void train();
    Stage2EpochLog run_epoch();

    SdfBatch make_sdf_batch(const std::vector<int>& rows, std::uint64_t seed) const;

    /// Objective for a batch given its posterior; latents = mean + exp(logvar/2) * noise.
    Stage2Terms objective(const std::vector<int>& rows, const Posterior& posterior, const torch::Tensor& noise,
                          const SdfBatch& sdf_batch);

    Posterior encode_rows(const std::vector<int>& rows);

    Stage2Model& model() { return model_; }
    const Stage2Model& model() const { return model_; }
    const std::vector<Stage2EpochLog>& history() const { return history_; }
    const Stage2Data& data() const { return data_; }
    torch::optim::Adam& optimizer() { return *optimizer_; }

private:
    Stage2Data data_;
    FrozenRenderer& renderer_;
    Stage2Model model_;
    torch::Tensor disease_values_;
    torch::Tensor disease_mask_;
    torch::Tensor age_values_;
    std::unique_ptr<torch::optim::Adam> optimizer_;
    std::vector<Stage2EpochLog> history_;
};

struct Stage2Result {
    Stage2Model model;
    std::vector<Stage2EpochLog> history;
};

/// Trains one model; the renderer is verified untouched afterwards (throws
/// ContractViolation otherwise). NaN in any term throws NumericalError.
Stage2Result train_stage2(Stage2Data data, const Stage2Config& cfg, FrozenRenderer& renderer);

/// Same configuration repeated with each seed.
std::vector<Stage2Result> train_stage2_seeds(const Stage2Data& data, const Stage2Config& cfg,
                                             FrozenRenderer& renderer, const std::vector<std::uint64_t>& seeds);

/// Posterior means [N, k] of the codes, without sampling.
RowMatrix encode_means(CodeVae& vae, const torch::Tensor& codes);

/// D(mean(E(z))) for each code row.
torch::Tensor round_trip(CodeVae& vae, const torch::Tensor& codes);

/// CSV: epoch,total,code,kl,snnl,cov,dis_sen,sdf
void write_stage2_log(const std::filesystem::path& path, const std::vector<Stage2EpochLog>& history);

}  // namespace shapedis::stage2
