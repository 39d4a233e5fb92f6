#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "rap/common.hpp"

namespace rap {

struct Sample {
    std::string id;
    Vec features;
    std::optional<std::string> label;       // ground truth, known classes only
    std::optional<std::string> eval_label;  // hidden truth for evaluation
};

struct TaskSpec {
    std::vector<std::string> known_classes;  // sorted, deduplicated
    int total_classes = 0;

    int known_count() const { return static_cast<int>(known_classes.size()); }
    int novel_count() const { return total_classes - known_count(); }
    /// Dense index of a known class name, or -1.
    int known_index(const std::string& name) const;
};

struct Dataset {
    std::vector<Sample> labeled;
    std::vector<Sample> unlabeled;
    std::vector<Sample> test;
    TaskSpec task;
    int dim = 0;

    /// Samples used for evaluation: the test split when present,
    /// otherwise the unlabeled split (whose eval_label carries truth).
    const std::vector<Sample>& eval_split() const {
        return test.empty() ? unlabeled : test;
    }
};

/// Row-wise mean of a token matrix (rows = tokens).
Vec mean_pool(const Mat& tokens);

Dataset load_jsonl(const std::string& path);
void save_jsonl(const Dataset& ds, const std::string& path);

struct SynthParams {
    int k = 2;
    int n_per_class = 10;
    int d = 2;
    double sep = 6.0;
    double sigma = 1.0;
    double labeled_fraction = 0.5;
    double known_fraction = 1.0;
    std::uint64_t seed = 0;
};

/// Isotropic Gaussian mixture with centers at mutual distance >= sep.
/// The first round(known_fraction*k) classes are known; labeled_fraction of
/// each known class's samples form the labeled split, everything else is
/// unlabeled with the truth retained in eval_label.
Dataset synth_mixture(const SynthParams& p);

}  // namespace rap
