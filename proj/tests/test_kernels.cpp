#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "rap/kernels.hpp"

using namespace rap;

namespace {

std::vector<Vec> random_points(int n, int d, Rng& rng) {
    std::vector<Vec> pts(n);
    for (auto& p : pts) {
        p = Vec(d);
        for (int i = 0; i < d; ++i) p[i] = rng.normal();
    }
    return pts;
}

}  // namespace

TEST_CASE("embed_batch matches the serial reference bitwise") {
    Rng rng(5);
    EncoderHead enc = EncoderHead::init(8, 6, rng);
    auto xs = random_points(257, 8, rng);
    auto a = kernels::embed_batch_serial(enc, xs);
    auto b = kernels::embed_batch(enc, xs);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("assign_points matches the serial reference bitwise") {
    Rng rng(6);
    auto pts = random_points(501, 4, rng);
    auto cents = random_points(7, 4, rng);
    std::vector<int> la, lb;
    std::vector<double> da, db;
    kernels::assign_points_serial(pts, cents, la, da);
    kernels::assign_points(pts, cents, lb, db);
    CHECK(la == lb);
    CHECK(da == db);
}

TEST_CASE("assignment ties go to the lowest centroid index") {
    std::vector<Vec> pts(1, Vec::Zero(2));
    Vec c1(2), c2(2);
    c1 << 1, 0;
    c2 << -1, 0;
    std::vector<int> labels;
    std::vector<double> dists;
    kernels::assign_points_serial(pts, {c1, c2}, labels, dists);
    CHECK(labels[0] == 0);
    CHECK(dists[0] == doctest::Approx(1.0));
}
