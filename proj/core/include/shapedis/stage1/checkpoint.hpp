#pragma once

#include "shapedis/stage1/trainer.hpp"

#include <torch/torch.h>

#include <filesystem>
#include <string>
#include <vector>

namespace shapedis::stage1 {

inline constexpr const char* kStage1Magic = "S1CKPT";
inline constexpr std::uint32_t kStage1Version = 1;

struct Stage1State {
    Stage1Model model;
    std::vector<Stage1EpochLog> history;
};

void save_stage1_checkpoint(const std::filesystem::path& path, const Stage1Model& model,
                            const torch::optim::Optimizer& optimizer, const std::vector<Stage1EpochLog>& history);

/// Loads decoder, codes, prior and history. Throws FormatError on a bad
/// magic, version or truncated file.
Stage1State load_stage1_checkpoint(const std::filesystem::path& path);

void restore_stage1_optimizer(const std::filesystem::path& path, torch::optim::Optimizer& optimizer);

std::string stage1_config_to_json(const Stage1Config& cfg);
Stage1Config stage1_config_from_json(const std::string& text);

}  // namespace shapedis::stage1
