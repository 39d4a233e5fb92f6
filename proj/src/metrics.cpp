#include "rap/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace rap {

namespace {

std::vector<int> densify(const std::vector<int>& labels, int& n_distinct) {
    std::map<int, int> remap;
    for (int l : labels) remap.emplace(l, 0);
    int next = 0;
    for (auto& [k, v] : remap) v = next++;
    n_distinct = next;
    std::vector<int> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) out[i] = remap[labels[i]];
    return out;
}

void check_lengths(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.empty() || a.size() != b.size())
        throw Error("metrics: label vectors must be nonempty and of equal length");
}

double comb2(double m) { return m * (m - 1.0) / 2.0; }

}  // namespace

Contingency Contingency::build(const std::vector<int>& y_gt, const std::vector<int>& y_p) {
    check_lengths(y_gt, y_p);
    int r = 0, c = 0;
    auto gt = densify(y_gt, r);
    auto pr = densify(y_p, c);
    Contingency t;
    t.counts = Mat::Zero(r, c);
    for (std::size_t i = 0; i < gt.size(); ++i) t.counts(gt[i], pr[i]) += 1.0;
    t.row_sums.resize(r);
    t.col_sums.resize(c);
    for (int i = 0; i < r; ++i) t.row_sums[i] = t.counts.row(i).sum();
    for (int j = 0; j < c; ++j) t.col_sums[j] = t.counts.col(j).sum();
    t.total = static_cast<double>(gt.size());
    return t;
}

double nmi(const std::vector<int>& y_gt, const std::vector<int>& y_p) {
    Contingency t = Contingency::build(y_gt, y_p);
    double n = t.total;
    double h_u = 0.0, h_v = 0.0, mi = 0.0;
    for (double u : t.row_sums)
        if (u > 0) h_u -= (u / n) * std::log(u / n);
    for (double v : t.col_sums)
        if (v > 0) h_v -= (v / n) * std::log(v / n);
    for (int i = 0; i < t.counts.rows(); ++i)
        for (int j = 0; j < t.counts.cols(); ++j) {
            double nij = t.counts(i, j);
            if (nij > 0)
                mi += (nij / n) * std::log(nij * n / (t.row_sums[i] * t.col_sums[j]));
        }
    double denom = 0.5 * (h_u + h_v);
    if (denom <= 0.0) return 0.0;  // both partitions constant
    return mi / denom;
}

double ari(const std::vector<int>& y_gt, const std::vector<int>& y_p) {
    Contingency t = Contingency::build(y_gt, y_p);
    double sum_ij = 0.0, sum_u = 0.0, sum_v = 0.0;
    for (int i = 0; i < t.counts.rows(); ++i)
        for (int j = 0; j < t.counts.cols(); ++j) sum_ij += comb2(t.counts(i, j));
    for (double u : t.row_sums) sum_u += comb2(u);
    for (double v : t.col_sums) sum_v += comb2(v);
    double expected = sum_u * sum_v / comb2(t.total);
    double max_index = 0.5 * (sum_u + sum_v);
    double denom = max_index - expected;
    if (std::abs(denom) < 1e-12) return 1.0;  // degenerate: both one cluster
    return (sum_ij - expected) / denom;
}

AccResult acc(const std::vector<int>& y_gt, const std::vector<int>& y_p) {
    Contingency t = Contingency::build(y_gt, y_p);
    int m = static_cast<int>(std::max(t.counts.rows(), t.counts.cols()));
    double max_overlap = t.total;
    // Pad with zero overlap so unmatched clusters contribute nothing.
    Mat cost = Mat::Constant(m, m, max_overlap);
    for (int i = 0; i < t.counts.rows(); ++i)
        for (int j = 0; j < t.counts.cols(); ++j) cost(j, i) = max_overlap - t.counts(i, j);
    AccResult res;
    res.mapping = hungarian(cost);  // predicted cluster -> true class
    double matched = 0.0;
    for (int j = 0; j < t.counts.cols(); ++j) {
        int cls = res.mapping.map[j];
        if (cls < t.counts.rows()) matched += t.counts(cls, j);
    }
    res.accuracy = matched / t.total;
    return res;
}

MetricsReport evaluate(const std::vector<int>& y_gt, const std::vector<int>& y_p) {
    MetricsReport rep;
    rep.nmi = nmi(y_gt, y_p);
    rep.ari = ari(y_gt, y_p);
    AccResult a = acc(y_gt, y_p);
    rep.acc = a.accuracy;
    rep.mapping = a.mapping;
    int k = 0;
    auto pr = densify(y_p, k);
    rep.cluster_sizes.assign(k, 0);
    for (int l : pr) ++rep.cluster_sizes[l];
    return rep;
}

}  // namespace rap
