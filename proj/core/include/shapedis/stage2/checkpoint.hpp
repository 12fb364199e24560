#pragma once

#include "shapedis/stage2/trainer.hpp"

#include <filesystem>
#include <string>

namespace shapedis::stage2 {

inline constexpr const char* kStage2Magic = "S2CKPT";
inline constexpr std::uint32_t kStage2Version = 1;

/// Config, VAE parameters, stage-1 renderer checksum, seed and epoch.
/// `stage1_checkpoint_hash` is the content hash of the stage-1 file used.
void save_stage2_checkpoint(const std::filesystem::path& path, const Stage2Model& model,
                            const std::string& stage1_checkpoint_hash);

struct Stage2Checkpoint {
    Stage2Model model;
    std::string stage1_checkpoint_hash;
};

/// Throws FormatError on a bad magic, version or truncated file.
Stage2Checkpoint load_stage2_checkpoint(const std::filesystem::path& path);

std::string stage2_config_to_json(const Stage2Config& cfg);
Stage2Config stage2_config_from_json(const std::string& text);

}  // namespace shapedis::stage2
