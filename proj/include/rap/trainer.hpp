#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rap/dataset.hpp"
#include "rap/losses.hpp"
#include "rap/metrics.hpp"

namespace rap {

enum class KMode { GroundTruth, Estimate, Fixed };

struct TrainConfig {
    LossConfig loss;
    int epochs = 50;
    int batch_size = 64;
    double learning_rate = 5e-2;
    int warmup_epochs = 5;
    int early_stop_patience = 20;
    double grad_clip = 5.0;  // 0 disables
    int hidden_dim = 32;
    std::uint64_t seed = 0;
    KMode k_mode = KMode::GroundTruth;
    int k_fixed = 0;
    double estimate_drop_ratio = 0.5;

    void validate() const;
};

/// Flat `key = value` config file; unknown keys are an error.
TrainConfig parse_config_file(const std::string& path, TrainConfig base = {});
void apply_config_entry(TrainConfig& cfg, const std::string& key, const std::string& value);

struct EpochLog {
    int epoch = 0;
    double l_all = 0.0, l_r = 0.0, l_a = 0.0, l_ce = 0.0;
    double val_nmi = 0.0;
    double within = 0.0, between = 0.0;
};

struct Model {
    EncoderHead encoder;
    ClassifierHead classifier;
    PrototypeSet protos;
    std::vector<std::string> known_classes;
    int dim = 0;
    std::uint64_t seed = 0;
};

struct TrainResult {
    Model model;
    std::vector<EpochLog> logs;
    int best_epoch = 0;
    int k_used = 0;
};

/// CE-only training of encoder + classifier on labeled samples.
void warmup(const std::vector<Vec>& xs, const std::vector<int>& ys, EncoderHead& enc,
            ClassifierHead& cls, const TrainConfig& cfg, Rng& rng);

TrainResult train(const Dataset& dataset, const TrainConfig& cfg);

struct InferResult {
    ClusterAssignment assignment;
    std::vector<Vec> embeddings;
    std::optional<MetricsReport> report;  // present when eval labels exist
};

InferResult infer(const EncoderHead& encoder, const std::vector<Sample>& samples, int k,
                  std::uint64_t seed);

void save_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

}  // namespace rap
