#pragma once

#include "shapedis/geometry/sampling.hpp"
#include "shapedis/stage1/decoder.hpp"
#include "shapedis/stage1/losses.hpp"

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace shapedis::stage1 {

struct Stage1Config {
    DecoderConfig decoder;
    double lambda_eik = 1e-4;
    double lambda_reg = 1e-4;
    double lambda_gmm = 1e-3;
    double clamp = 0.1;
    int epochs = 2000;
    int batch_shapes = 16;
    int samples_per_shape = 16384;  // samples drawn and cached per shape
    int points_per_step = 1024;     // subsample of those used per shape per step
    double lr = 1e-3;
    int lr_decay_every = 500;
    double lr_decay_factor = 0.5;
    double grad_clip = 1.0;
    double code_init_std = 0.01;
    int gmm_warmup_epochs = 0;
    int checkpoint_every = 0;  // epochs; 0 disables periodic checkpoints
    std::filesystem::path checkpoint_path;
    std::uint64_t seed = 0;
};

struct Stage1EpochLog {
    int epoch = 0;
    double total = 0.0;
    double sdf = 0.0;
    double reg = 0.0;
    double eikonal = 0.0;
    double gmm = 0.0;
};

/// Trained or in-training stage-1 state.
struct Stage1Model {
    SdfDecoder decoder{nullptr};
    torch::Tensor codes;  // [N, d], row i belongs to shape_ids[i]
    MixturePrior prior{nullptr};
    std::vector<std::string> shape_ids;
    Stage1Config config;
    int epoch = 0;

    /// Index of a shape id; throws InputError if unknown.
    std::size_t index_of(const std::string& shape_id) const;
};

/// Separate loss terms of one batch (unweighted) plus the weighted total.
struct Stage1Terms {
    torch::Tensor total;
    torch::Tensor sdf;
    torch::Tensor reg;
    torch::Tensor eikonal;
    torch::Tensor gmm;
};

struct Stage1Batch {
    std::vector<int> shapes;  // code rows in the batch
    torch::Tensor points;     // [n, 3]
    torch::Tensor sdf;        // [n]
    torch::Tensor owner;      // [n] int64 code row of each point
};

/// Joint optimizer of decoder parameters, codes and mixture prior.
class Stage1Trainer {
public:
    Stage1Trainer(std::vector<geometry::SampleSet> samples, Stage1Config cfg);

    /// Runs epochs until cfg.epochs have been completed in total.
    void train();
    /// Runs one epoch and returns its log entry.
    Stage1EpochLog run_epoch();

    Stage1Batch make_batch(const std::vector<int>& shapes, std::uint64_t seed) const;
    Stage1Terms objective(const Stage1Batch& batch, bool use_gmm);

    Stage1Model& model() { return model_; }
    const Stage1Model& model() const { return model_; }
    const std::vector<Stage1EpochLog>& history() const { return history_; }
    torch::optim::Adam& optimizer() { return *optimizer_; }

    void save_checkpoint(const std::filesystem::path& path) const;
    /// Restores decoder, codes, prior, optimizer state, history and epoch.
    static std::unique_ptr<Stage1Trainer> resume(const std::filesystem::path& path,
                                                 std::vector<geometry::SampleSet> samples);

private:
    std::vector<torch::Tensor> samples_;  // per shape [m, 4] float32
    Stage1Model model_;
    std::unique_ptr<torch::optim::Adam> optimizer_;
    std::vector<Stage1EpochLog> history_;
};

struct Stage1Result {
    Stage1Model model;
    std::vector<Stage1EpochLog> history;
};

/// Trains from scratch. Throws InputError with < 2 shapes or an empty sample
/// set, NumericalError (with a batch snapshot) on a non-finite loss.
Stage1Result train_stage1(std::vector<geometry::SampleSet> samples, const Stage1Config& cfg);

/// Residual clamped-L1 SDF error of a code against its samples (no regularizer).
double sdf_residual(SdfDecoder& decoder, const torch::Tensor& code, const geometry::SampleSet& samples,
                    double delta);

}  // namespace shapedis::stage1
