#pragma once

#include <vector>

#include "rap/common.hpp"

namespace rap {

struct ClusterAssignment {
    std::vector<int> labels;
    std::vector<Vec> centroids;
    double inertia = 0.0;
    int iterations = 0;
};

/// Minimum-cost perfect assignment row -> column on a square matrix.
struct AssignmentMapping {
    std::vector<int> map;  // map[row] = column
    double total_cost = 0.0;
};

/// Lloyd's algorithm with k-means++ seeding. Empty clusters are reseeded at
/// the point currently farthest from its assigned centroid. Deterministic for
/// a fixed seed; inertia is checked to be non-increasing across iterations.
ClusterAssignment kmeans(const std::vector<Vec>& points, int k, std::uint64_t seed,
                         int max_iter = 100, double tol = 1e-6);

AssignmentMapping hungarian(const Mat& cost);

/// Over-cluster with k_init, then count clusters whose size reaches
/// drop_ratio * (n/k_init). Throws if every cluster is dropped.
int estimate_k(const std::vector<Vec>& points, int k_init, double drop_ratio,
               std::uint64_t seed);

}  // namespace rap
