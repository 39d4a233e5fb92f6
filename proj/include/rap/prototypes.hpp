#pragma once

#include <vector>

#include "rap/clustering.hpp"
#include "rap/common.hpp"

namespace rap {

/// Unit-norm class prototypes with EMA momentum.
struct PrototypeSet {
    std::vector<Vec> mu;
    double momentum = 0.9;

    int count() const { return static_cast<int>(mu.size()); }
    void renormalize();
};

/// Per-cluster normalized mean embedding. Prototype index = cluster label.
PrototypeSet generate(const std::vector<Vec>& embeddings, const ClusterAssignment& assignment,
                      double momentum = 0.9);

/// mu_c <- renormalize(lambda*mu_c + (1-lambda)*z).
void ema_update(PrototypeSet& protos, int c, const Vec& z);

struct WithinBetween {
    double within = 0.0;   // mean 1 - cos(z_i, mu_label(i))
    double between = 0.0;  // mean 1 - cos(mu_i, mu_j) over unordered pairs
};

WithinBetween within_between_stats(const std::vector<Vec>& embeddings,
                                   const std::vector<int>& labels,
                                   const PrototypeSet& protos);

}  // namespace rap
