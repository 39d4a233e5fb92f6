#include "rap/encoder.hpp"

#include <cmath>

namespace rap {

EncoderHead EncoderHead::init(int d, int h_out, Rng& rng) {
    double bound = 1.0 / std::sqrt(static_cast<double>(d));
    EncoderHead head;
    head.W = Mat(h_out, d);
    head.b = Vec(h_out);
    for (int i = 0; i < h_out; ++i)
        for (int j = 0; j < d; ++j) head.W(i, j) = rng.uniform(-bound, bound);
    for (int i = 0; i < h_out; ++i) head.b[i] = rng.uniform(-bound, bound);
    return head;
}

ClassifierHead ClassifierHead::init(int h_out, int n_known, Rng& rng) {
    double bound = 1.0 / std::sqrt(static_cast<double>(h_out));
    ClassifierHead cls;
    cls.V = Mat(n_known, h_out);
    cls.c = Vec(n_known);
    for (int i = 0; i < n_known; ++i)
        for (int j = 0; j < h_out; ++j) cls.V(i, j) = rng.uniform(-bound, bound);
    for (int i = 0; i < n_known; ++i) cls.c[i] = rng.uniform(-bound, bound);
    return cls;
}

ParamGradients ParamGradients::zeros(const EncoderHead& enc, const ClassifierHead& cls) {
    ParamGradients g;
    g.dW = Mat::Zero(enc.W.rows(), enc.W.cols());
    g.db = Vec::Zero(enc.b.size());
    g.dV = Mat::Zero(cls.V.rows(), cls.V.cols());
    g.dc = Vec::Zero(cls.c.size());
    return g;
}

ForwardCache forward(const EncoderHead& head, const Vec& x) {
    ForwardCache cache;
    cache.x = x;
    cache.u = (head.W * x + head.b).array().tanh();
    cache.u_norm = cache.u.norm();
    if (cache.u_norm < 1e-12)
        throw Error("forward: degenerate embedding (pre-normalization norm < 1e-12)");
    cache.z = cache.u / cache.u_norm;
    return cache;
}

Vec backward(const EncoderHead& head, const ForwardCache& cache, const Vec& dL_dz,
             Mat& dW, Vec& db) {
    // Normalization Jacobian (I - zz^T)/||u||, then tanh' = 1 - u^2.
    Vec g_u = (dL_dz - cache.z * cache.z.dot(dL_dz)) / cache.u_norm;
    Vec g_a = g_u.cwiseProduct(Vec::Ones(cache.u.size()) - cache.u.cwiseProduct(cache.u));
    dW.noalias() += g_a * cache.x.transpose();
    db += g_a;
    return head.W.transpose() * g_a;
}

Vec classify(const ClassifierHead& cls, const Vec& z) {
    return cls.V * z + cls.c;
}

}  // namespace rap
