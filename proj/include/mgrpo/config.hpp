#pragma once

#include <string>

#include "mgrpo/grpo.hpp"
#include "mgrpo/tasks.hpp"

namespace mgrpo {

/// Everything a run needs, resolved from preset + config file + flag
/// overrides. Flat key-value text; unknown keys are rejected.
struct RunConfig {
    TrainConfig train;
    TaskSpec task;
    RewardSpec reward;
    ModelConfig model;

    // Pretraining phase.
    int pretrain_steps = 800;
    int pretrain_batch = 16;
    double pretrain_lr = 3e-3;

    void validate() const;
};

/// Built-in presets: "text" (G=6, mu=6, gamma=0.6, eps=0.2, semi-ar
/// rollouts) and "vision_style" (G=9, mu=8, gamma=0.8, eps=0.05, emerge
/// rollouts with random reversing).
RunConfig preset_config(const std::string& name);

/// Parse a flat key-value config file. Lines are `key = value`, '#'
/// comments. A `preset` key selects the base; every other key overrides
/// one documented field. Errors name the offending key.
RunConfig load_config(const std::string& path);

/// Apply one key=value override onto an existing config.
void apply_config_key(RunConfig& cfg, const std::string& key, const std::string& value);

std::string config_to_text(const RunConfig& cfg);

struct RunManifest {
    RunConfig config;
    uint64_t master_seed = 0;
    std::string code_version;
    std::string started_at;
    std::string out_dir;
};

std::string manifest_to_json(const RunManifest& manifest);
void write_manifest(const RunManifest& manifest, const std::string& path);

inline constexpr const char* kCodeVersion = "0.1.0";

/// Environment variable naming the default output root.
inline constexpr const char* kOutRootEnv = "MASKGRPO_OUT_ROOT";

}  // namespace mgrpo
