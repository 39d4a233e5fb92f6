#include "rap/kernels.hpp"

namespace rap {
namespace kernels {

namespace {

inline void assign_one(const std::vector<Vec>& points, const std::vector<Vec>& centroids,
                       std::size_t i, std::vector<int>& labels, std::vector<double>& sq_dists) {
    int best = 0;
    double best_d = (points[i] - centroids[0]).squaredNorm();
    for (std::size_t c = 1; c < centroids.size(); ++c) {
        double d = (points[i] - centroids[c]).squaredNorm();
        if (d < best_d) {  // strict: ties keep the lowest index
            best_d = d;
            best = static_cast<int>(c);
        }
    }
    labels[i] = best;
    sq_dists[i] = best_d;
}

}  // namespace

std::vector<Vec> embed_batch_serial(const EncoderHead& head, const std::vector<Vec>& xs) {
    std::vector<Vec> zs(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) zs[i] = forward(head, xs[i]).z;
    return zs;
}

std::vector<Vec> embed_batch(const EncoderHead& head, const std::vector<Vec>& xs) {
    std::vector<Vec> zs(xs.size());
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(xs.size()); ++i)
        zs[i] = forward(head, xs[i]).z;
    return zs;
}

void assign_points_serial(const std::vector<Vec>& points, const std::vector<Vec>& centroids,
                          std::vector<int>& labels, std::vector<double>& sq_dists) {
    labels.resize(points.size());
    sq_dists.resize(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) assign_one(points, centroids, i, labels, sq_dists);
}

void assign_points(const std::vector<Vec>& points, const std::vector<Vec>& centroids,
                   std::vector<int>& labels, std::vector<double>& sq_dists) {
    labels.resize(points.size());
    sq_dists.resize(points.size());
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(points.size()); ++i)
        assign_one(points, centroids, static_cast<std::size_t>(i), labels, sq_dists);
}

}  // namespace kernels
}  // namespace rap
