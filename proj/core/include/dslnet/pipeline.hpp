#pragma once

#include <utility>
#include <vector>

#include "dslnet/config.hpp"
#include "dslnet/model.hpp"

namespace dslnet {

struct LabeledSequence {
    SkeletonSequence seq;
    int label = 0;
};

struct Dataset {
    std::vector<LabeledSequence> train;
    std::vector<LabeledSequence> test;
    int num_classes = 0;
};

// Synthetic dataset from the config's generator spec, or sequences resolved
// from train/test manifests (paths relative to the manifest file).
Dataset build_dataset(const TrainConfig& cfg);

struct EpochMetrics {
    int epoch = 0;
    double train_loss = 0.0;
    double train_accuracy = 0.0;  // percent
};

struct MetricsReport {
    std::vector<EpochMetrics> per_epoch;
    double test_accuracy = 0.0;  // percent, top-1
    std::vector<std::vector<int>> confusion;
    double flops = 0.0;
};

struct TrainResult {
    DslNet model;
    MetricsReport metrics;
};

// Deterministic given (config, seed). Throws DivergenceError when the loss
// turns non-finite, DataError on unresolvable datasets.
TrainResult train(const TrainConfig& cfg);

// Removes floor(rate*T) uniformly random frames (seeded) and re-indexes time.
SkeletonSequence drop_frames(const SkeletonSequence& seq, double rate,
                             std::uint64_t seed);

// Top-1 accuracy in percent; optionally fills the confusion matrix
// (rows = true class).
double evaluate_accuracy(const DslNet& model, const std::vector<LabeledSequence>& samples,
                         double dropout_rate, std::uint64_t seed,
                         std::vector<std::vector<int>>* confusion = nullptr);

// One training run per ablation mode over shared data and seed.
std::vector<std::pair<std::string, double>> ablate(const TrainConfig& cfg);

// Accuracy of a trained full model under frame dropout, averaged over
// `repeats` dropout seeds per rate.
std::vector<std::pair<double, double>> robustness(const DslNet& model,
                                                  const std::vector<LabeledSequence>& test,
                                                  const std::vector<double>& rates,
                                                  std::uint64_t seed, int repeats = 3);

void export_features(const DslNet& model, const std::vector<LabeledSequence>& samples,
                     const std::filesystem::path& path);

std::string metrics_to_json(const TrainConfig& cfg, const MetricsReport& report);
std::string ablation_to_csv(const std::vector<std::pair<std::string, double>>& rows);
std::string robustness_to_csv(const std::vector<std::pair<double, double>>& rows);

// Deterministic stream splitter for per-sample seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0);

}  // namespace dslnet
