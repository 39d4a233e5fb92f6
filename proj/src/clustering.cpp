#include "rap/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rap/kernels.hpp"

namespace rap {

namespace {

// k-means++ seeding: first seed uniform, the rest D^2-weighted.
std::vector<Vec> seed_centroids(const std::vector<Vec>& points, int k, Rng& rng) {
    std::vector<Vec> centroids;
    centroids.reserve(k);
    std::vector<bool> chosen(points.size(), false);
    std::size_t first = rng.index(points.size());
    centroids.push_back(points[first]);
    chosen[first] = true;

    std::vector<double> d2(points.size());
    for (std::size_t i = 0; i < points.size(); ++i)
        d2[i] = (points[i] - centroids[0]).squaredNorm();

    while (static_cast<int>(centroids.size()) < k) {
        double total = 0.0;
        for (double v : d2) total += v;
        std::size_t pick = points.size();
        if (total > 0.0) {
            double u = rng.uniform(0.0, total);
            double acc = 0.0;
            for (std::size_t i = 0; i < points.size(); ++i) {
                acc += d2[i];
                if (u < acc) { pick = i; break; }
            }
            if (pick == points.size()) pick = points.size() - 1;
        } else {
            // All residual distances are zero; take the first unchosen point.
            pick = 0;
            while (pick < points.size() && chosen[pick]) ++pick;
            if (pick == points.size()) pick = 0;
        }
        chosen[pick] = true;
        centroids.push_back(points[pick]);
        for (std::size_t i = 0; i < points.size(); ++i)
            d2[i] = std::min(d2[i], (points[i] - centroids.back()).squaredNorm());
    }
    return centroids;
}

}  // namespace

ClusterAssignment kmeans(const std::vector<Vec>& points, int k, std::uint64_t seed,
                         int max_iter, double tol) {
    if (k < 1) throw Error("kmeans: k must be >= 1");
    if (static_cast<std::size_t>(k) > points.size())
        throw Error("kmeans: k (" + std::to_string(k) + ") exceeds point count (" +
                    std::to_string(points.size()) + ")");

    Rng rng(seed);
    ClusterAssignment out;
    out.centroids = seed_centroids(points, k, rng);

    std::vector<double> sq_dists;
    double prev_inertia = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < max_iter; ++iter) {
        kernels::assign_points(points, out.centroids, out.labels, sq_dists);
        double inertia = 0.0;
        for (double d : sq_dists) inertia += d;  // serial reduction, order fixed
        if (inertia > prev_inertia + 1e-9 * (1.0 + prev_inertia))
            throw Error("kmeans: inertia increased between iterations");
        prev_inertia = inertia;
        out.inertia = inertia;
        out.iterations = iter + 1;

        std::vector<Vec> next(k, Vec::Zero(points[0].size()));
        std::vector<int> counts(k, 0);
        for (std::size_t i = 0; i < points.size(); ++i) {
            next[out.labels[i]] += points[i];
            ++counts[out.labels[i]];
        }
        double shift = 0.0;
        for (int c = 0; c < k; ++c) {
            if (counts[c] > 0) {
                next[c] /= counts[c];
            } else {
                // Reseed at the point farthest from its assigned centroid.
                std::size_t far = 0;
                for (std::size_t i = 1; i < points.size(); ++i)
                    if (sq_dists[i] > sq_dists[far]) far = i;
                next[c] = points[far];
                sq_dists[far] = 0.0;  // avoid reseeding two empties at one point
            }
            shift = std::max(shift, (next[c] - out.centroids[c]).norm());
        }
        out.centroids = std::move(next);
        if (shift < tol) break;
    }
    kernels::assign_points(points, out.centroids, out.labels, sq_dists);
    double inertia = 0.0;
    for (double d : sq_dists) inertia += d;
    out.inertia = inertia;
    return out;
}

AssignmentMapping hungarian(const Mat& cost) {
    if (cost.rows() != cost.cols()) throw Error("hungarian: matrix must be square");
    if (!cost.allFinite()) throw Error("hungarian: matrix must be finite");
    const int n = static_cast<int>(cost.rows());

    // Potentials method, O(n^3). 1-based internal arrays.
    const double INF = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, INF);
        std::vector<bool> used(n + 1, false);
        do {
            used[j0] = true;
            int i0 = p[j0], j1 = -1;
            double delta = INF;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) { minv[j] = cur; way[j] = j0; }
                if (minv[j] < delta) { delta = minv[j]; j1 = j; }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) { u[p[j]] += delta; v[j] -= delta; }
                else minv[j] -= delta;
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }

    AssignmentMapping out;
    out.map.assign(n, -1);
    for (int j = 1; j <= n; ++j) out.map[p[j] - 1] = j - 1;
    for (int i = 0; i < n; ++i) out.total_cost += cost(i, out.map[i]);
    return out;
}

int estimate_k(const std::vector<Vec>& points, int k_init, double drop_ratio,
               std::uint64_t seed) {
    if (drop_ratio <= 0.0 || drop_ratio >= 1.0)
        throw Error("estimate_k: drop_ratio must be in (0,1)");
    ClusterAssignment a = kmeans(points, k_init, seed);
    std::vector<int> sizes(k_init, 0);
    for (int lab : a.labels) ++sizes[lab];
    double threshold = drop_ratio * (static_cast<double>(points.size()) / k_init);
    int surviving = 0;
    for (int s : sizes)
        if (s >= threshold) ++surviving;
    if (surviving == 0) throw Error("estimate_k: every cluster fell below the size threshold");
    return surviving;
}

}  // namespace rap
