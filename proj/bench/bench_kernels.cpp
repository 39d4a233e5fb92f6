// Timing comparison of the serial reference kernels against the OpenMP ones.
#include <chrono>
#include <cstdio>

#include "rap/kernels.hpp"

using namespace rap;

namespace {

template <typename F>
double time_ms(F&& f, int reps) {
    auto t0 = std::chrono::steady_clock::now();
    for (int r = 0; r < reps; ++r) f();
    auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

}  // namespace

int main() {
    const int n = 20000, d = 64, h = 64, k = 50;
    Rng rng(42);
    std::vector<Vec> xs(n);
    for (auto& x : xs) {
        x = Vec(d);
        for (int i = 0; i < d; ++i) x[i] = rng.normal();
    }
    EncoderHead enc = EncoderHead::init(d, h, rng);
    auto zs = kernels::embed_batch(enc, xs);
    std::vector<Vec> centroids(zs.begin(), zs.begin() + k);
    std::vector<int> labels;
    std::vector<double> dists;

    double em_s = time_ms([&] { kernels::embed_batch_serial(enc, xs); }, 5);
    double em_p = time_ms([&] { kernels::embed_batch(enc, xs); }, 5);
    double as_s = time_ms([&] { kernels::assign_points_serial(zs, centroids, labels, dists); }, 5);
    double as_p = time_ms([&] { kernels::assign_points(zs, centroids, labels, dists); }, 5);

    std::printf("kernel            serial(ms)  openmp(ms)  speedup\n");
    std::printf("embed_batch       %10.2f  %10.2f  %6.2fx\n", em_s, em_p, em_s / em_p);
    std::printf("assign_points     %10.2f  %10.2f  %6.2fx\n", as_s, as_p, as_s / as_p);
    return 0;
}
