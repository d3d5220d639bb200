#pragma once

#include <filesystem>
#include <string>

#include "dslnet/model.hpp"
#include "dslnet/optim.hpp"
#include "dslnet/skeleton.hpp"

namespace dslnet {

struct SynthDatasetSpec {
    int num_shapes = 5;
    int num_trajs = 2;
    int train_per_class = 40;
    int test_per_class = 10;
    std::size_t frames = 40;
    double noise_sigma = 0.01;

    int num_classes() const { return num_shapes * num_trajs; }
};

struct TrainConfig {
    // data: synthetic generator by default, or explicit manifests
    std::string data_source = "synth";  // "synth" | "manifest"
    SynthDatasetSpec synth;
    std::string train_manifest;
    std::string test_manifest;

    ModelConfig model;

    int batch_size = 8;
    int epochs = 12;
    ScheduleSpec schedule{3e-3, 1e-4, 1};  // total_steps filled in by train()
    AdamWConfig adamw{0.9, 0.999, 1e-8, 1e-4};
    std::uint64_t seed = 1;

    bool augment_enabled = true;
    AugmentSpec aug{0.15, {0.9, 1.1}, 0.01, {0.85, 1.15}, 0};

    void validate() const;
};

// key=value text config; '#' starts a comment. Unknown keys are errors.
TrainConfig parse_train_config(const std::filesystem::path& path);
void apply_config_line(TrainConfig& cfg, const std::string& key, const std::string& value);

// Canonical echo of every field, used inside metrics.json.
std::string config_to_string(const TrainConfig& cfg);

}  // namespace dslnet
