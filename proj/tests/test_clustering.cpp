#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "rap/clustering.hpp"
#include "rap/dataset.hpp"
#include "rap/metrics.hpp"

using namespace rap;

namespace {

Vec v2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}

std::vector<Vec> mixture_points(const SynthParams& p, std::vector<int>& truth) {
    Dataset ds = synth_mixture(p);
    std::vector<Vec> pts;
    truth.clear();
    for (const auto& s : ds.labeled) {
        pts.push_back(s.features);
        truth.push_back(std::stoi(s.label->substr(1)));
    }
    for (const auto& s : ds.unlabeled) {
        pts.push_back(s.features);
        truth.push_back(std::stoi(s.eval_label->substr(1)));
    }
    return pts;
}

}  // namespace

TEST_CASE("kmeans on two well-separated pairs") {
    std::vector<Vec> pts = {v2(0, 0), v2(0.1, 0), v2(10, 0), v2(10.1, 0)};
    ClusterAssignment a = kmeans(pts, 2, 1);
    CHECK(a.labels[0] == a.labels[1]);
    CHECK(a.labels[2] == a.labels[3]);
    CHECK(a.labels[0] != a.labels[2]);
    int lo = a.labels[0], hi = a.labels[2];
    CHECK((a.centroids[lo] - v2(0.05, 0)).norm() < 1e-9);
    CHECK((a.centroids[hi] - v2(10.05, 0)).norm() < 1e-9);
}

TEST_CASE("kmeans k=1 returns the global mean") {
    std::vector<Vec> pts = {v2(1, 1), v2(3, 5), v2(-1, 0)};
    ClusterAssignment a = kmeans(pts, 1, 0);
    CHECK((a.centroids[0] - v2(1, 2)).norm() < 1e-12);
    CHECK(a.labels == std::vector<int>{0, 0, 0});
}

TEST_CASE("kmeans rejects k > n") {
    std::vector<Vec> pts = {v2(0, 0)};
    CHECK_THROWS_AS(kmeans(pts, 2, 0), Error);
}

TEST_CASE("kmeans recovers a separated mixture") {
    SynthParams p;
    p.k = 4;
    p.n_per_class = 50;
    p.d = 6;
    p.sep = 10.0;
    p.sigma = 1.0;
    p.seed = 11;
    std::vector<int> truth;
    auto pts = mixture_points(p, truth);
    ClusterAssignment a = kmeans(pts, 4, 3);
    CHECK(acc(truth, a.labels).accuracy >= 0.99);
}

TEST_CASE("kmeans is deterministic for a fixed seed") {
    Rng rng(4);
    std::vector<Vec> pts;
    for (int i = 0; i < 60; ++i) pts.push_back(v2(rng.normal(), rng.normal()));
    ClusterAssignment a = kmeans(pts, 5, 42), b = kmeans(pts, 5, 42);
    CHECK(a.labels == b.labels);
    CHECK(a.inertia == b.inertia);
}

TEST_CASE("kmeans labels are invariant under global rotation") {
    Rng rng(9);
    std::vector<Vec> pts;
    for (int i = 0; i < 80; ++i) {
        Vec p(3);
        for (int j = 0; j < 3; ++j) p[j] = rng.normal();
        pts.push_back(p);
    }
    // Random orthogonal map via QR of a Gaussian matrix.
    Mat g(3, 3);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) g(i, j) = rng.normal();
    Mat q = Eigen::HouseholderQR<Mat>(g).householderQ();
    std::vector<Vec> rotated;
    for (const auto& p : pts) rotated.push_back(q * p);

    ClusterAssignment a = kmeans(pts, 4, 17), b = kmeans(rotated, 4, 17);
    // Same seed, isometric geometry: identical label sequences.
    CHECK(a.labels == b.labels);
}

TEST_CASE("hungarian: diagonal optimum") {
    Mat cost(2, 2);
    cost << 0, 9, 9, 0;
    AssignmentMapping m = hungarian(cost);
    CHECK(m.map == std::vector<int>{0, 1});
    CHECK(m.total_cost == doctest::Approx(0));
}

TEST_CASE("hungarian: off-diagonal optimum") {
    Mat cost(2, 2);
    cost << 4, 1, 2, 3;
    AssignmentMapping m = hungarian(cost);
    CHECK(m.map == std::vector<int>{1, 0});
    CHECK(m.total_cost == doctest::Approx(3));
}

TEST_CASE("hungarian equals brute force on random 6x6 matrices") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed);
        Mat cost(6, 6);
        for (int i = 0; i < 6; ++i)
            for (int j = 0; j < 6; ++j) cost(i, j) = rng.uniform(0, 10);
        AssignmentMapping m = hungarian(cost);
        CHECK(m.total_cost == doctest::Approx(oracles::brute_force_assignment(cost)));
        double identity_cost = cost.diagonal().sum();
        CHECK(m.total_cost <= identity_cost + 1e-12);
    }
}

TEST_CASE("hungarian rejects non-square input") {
    CHECK_THROWS_AS(hungarian(Mat::Zero(2, 3)), Error);
}

TEST_CASE("estimate_k with k_init equal to true k keeps every cluster") {
    SynthParams p;
    p.k = 4;
    p.n_per_class = 50;
    p.d = 6;
    p.sep = 10.0;
    p.sigma = 1.0;
    p.seed = 2;
    std::vector<int> truth;
    auto pts = mixture_points(p, truth);
    CHECK(estimate_k(pts, 4, 0.5, 7) == 4);
}

TEST_CASE("estimate_k is deterministic") {
    SynthParams p;
    p.k = 3;
    p.n_per_class = 40;
    p.d = 4;
    p.sep = 8.0;
    p.sigma = 1.0;
    p.seed = 5;
    std::vector<int> truth;
    auto pts = mixture_points(p, truth);
    CHECK(estimate_k(pts, 6, 0.5, 9) == estimate_k(pts, 6, 0.5, 9));
}

TEST_CASE("estimate_k validates drop_ratio") {
    std::vector<Vec> pts = {v2(0, 0), v2(1, 1)};
    CHECK_THROWS_AS(estimate_k(pts, 2, 1.5, 0), Error);
}
