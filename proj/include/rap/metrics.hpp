#pragma once

#include <vector>

#include "rap/clustering.hpp"
#include "rap/common.hpp"

namespace rap {

/// Contingency table between two labelings of the same samples.
struct Contingency {
    Mat counts;              // true classes x predicted clusters
    std::vector<double> row_sums;
    std::vector<double> col_sums;
    double total = 0.0;

    static Contingency build(const std::vector<int>& y_gt, const std::vector<int>& y_p);
};

double nmi(const std::vector<int>& y_gt, const std::vector<int>& y_p);
double ari(const std::vector<int>& y_gt, const std::vector<int>& y_p);

struct AccResult {
    double accuracy = 0.0;
    AssignmentMapping mapping;  // predicted cluster -> true class (padded square)
};

AccResult acc(const std::vector<int>& y_gt, const std::vector<int>& y_p);

struct MetricsReport {
    double nmi = 0.0;
    double ari = 0.0;
    double acc = 0.0;
    std::vector<int> cluster_sizes;
    AssignmentMapping mapping;
};

MetricsReport evaluate(const std::vector<int>& y_gt, const std::vector<int>& y_p);

}  // namespace rap
