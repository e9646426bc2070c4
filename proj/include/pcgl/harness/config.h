// config.h
// Run configuration: training protocol constants, ablation switches, and the
// sectioned key = value config file they load from.
#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "pcgl/encoders/encoders.h"
#include "pcgl/objectives/objectives.h"

namespace pcgl::harness {

struct PretrainConfig {
    int epochs = 30;
    int batch = 32;
    double lr = 1e-3;
    std::string schedule = "cosine";  // cosine | constant
};

struct ProtoConfig {
    int epochs = 50;
    double lr = 1e-4;
    double weight_decay = 1e-4;
    double clip = 1.0;
    int per_class = 16;  // class-balanced episodic batch: per_class + per_class
    int k_shot = 5;
};

struct BaselineConfig {
    int epochs = 50;
    double head_lr = 1e-4;
    double backbone_lr = 1e-5;
    int freeze_epochs = 10;
    std::string schedule = "plateau";  // plateau | constant
};

// Ablation rows: switching any flag off degrades the full model to the
// corresponding reduced configuration.
struct AblationFlags {
    bool dual_path = true;          // off: waveform branch only, no fusion
    bool enhanced_encoders = true;  // off: undilated TCN, no residual skips
    bool hybrid_loss = true;        // off: NT-Xent alone (alpha = 0)
    bool proto_head = true;         // off: linear classifier head
};

struct RunConfig {
    std::uint64_t seed = 42;
    double label_fraction = 1.0;
    PretrainConfig pretrain;
    ProtoConfig proto;
    BaselineConfig baseline;
    AblationFlags ablation;
    objectives::LossConfig loss;

    void validate() const;
};

// Sectioned key = value text ('#'/';' comments). Unknown sections or keys and
// malformed values raise errors naming the offending field.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);

// Resolved-configuration manifest written next to every run artifact.
// Checkpoints embed it so a load reconstructs the exact wiring.
nlohmann::json run_config_json(const RunConfig& cfg);
RunConfig run_config_from_json(const nlohmann::json& j);

// Wiring implied by the ablation flags.
encoders::EncoderConfig encoder_config(const RunConfig& cfg);
objectives::LossConfig effective_loss(const RunConfig& cfg);

}  // namespace pcgl::harness
