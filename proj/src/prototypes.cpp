#include "rap/prototypes.hpp"

namespace rap {

void PrototypeSet::renormalize() {
    for (auto& m : mu) {
        double n = m.norm();
        if (n < 1e-12) throw Error("prototype renormalize: degenerate vector");
        m /= n;
    }
}

PrototypeSet generate(const std::vector<Vec>& embeddings, const ClusterAssignment& assignment,
                      double momentum) {
    if (embeddings.size() != assignment.labels.size())
        throw Error("generate: assignment does not cover the embeddings");
    int k = static_cast<int>(assignment.centroids.size());
    PrototypeSet protos;
    protos.momentum = momentum;
    protos.mu.assign(k, Vec::Zero(embeddings.empty() ? 0 : embeddings[0].size()));
    std::vector<int> counts(k, 0);
    for (std::size_t i = 0; i < embeddings.size(); ++i) {
        protos.mu[assignment.labels[i]] += embeddings[i];
        ++counts[assignment.labels[i]];
    }
    for (int c = 0; c < k; ++c) {
        if (counts[c] == 0) throw Error("generate: empty cluster " + std::to_string(c));
        protos.mu[c] /= counts[c];
    }
    protos.renormalize();
    return protos;
}

void ema_update(PrototypeSet& protos, int c, const Vec& z) {
    if (c < 0 || c >= protos.count()) throw Error("ema_update: class index out of range");
    Vec blended = protos.momentum * protos.mu[c] + (1.0 - protos.momentum) * z;
    double n = blended.norm();
    if (n < 1e-12) throw Error("ema_update: blended vector has vanishing norm");
    protos.mu[c] = blended / n;
}

WithinBetween within_between_stats(const std::vector<Vec>& embeddings,
                                   const std::vector<int>& labels,
                                   const PrototypeSet& protos) {
    if (embeddings.size() != labels.size())
        throw Error("within_between_stats: label count mismatch");
    WithinBetween wb;
    for (std::size_t i = 0; i < embeddings.size(); ++i) {
        int c = labels[i];
        if (c < 0 || c >= protos.count())
            throw Error("within_between_stats: label without prototype");
        double cs = embeddings[i].dot(protos.mu[c]) /
                    (embeddings[i].norm() * protos.mu[c].norm());
        wb.within += 1.0 - cs;
    }
    if (!embeddings.empty()) wb.within /= static_cast<double>(embeddings.size());

    int C = protos.count();
    int pairs = 0;
    for (int i = 0; i < C; ++i)
        for (int j = i + 1; j < C; ++j) {
            double cs = protos.mu[i].dot(protos.mu[j]) /
                        (protos.mu[i].norm() * protos.mu[j].norm());
            wb.between += 1.0 - cs;
            ++pairs;
        }
    if (pairs > 0) wb.between /= pairs;
    return wb;
}

}  // namespace rap
