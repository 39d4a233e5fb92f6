#pragma once

#include "rap/common.hpp"

namespace rap {

/// One affine layer + tanh + L2 normalization onto the unit sphere.
struct EncoderHead {
    Mat W;  // h_out x d
    Vec b;  // h_out

    int in_dim() const { return static_cast<int>(W.cols()); }
    int out_dim() const { return static_cast<int>(W.rows()); }

    static EncoderHead init(int d, int h_out, Rng& rng);
};

/// Linear classifier over the known classes.
struct ClassifierHead {
    Mat V;  // n_known x h_out
    Vec c;  // n_known

    static ClassifierHead init(int h_out, int n_known, Rng& rng);
};

struct ForwardCache {
    Vec x;       // input
    Vec u;       // tanh pre-normalization
    double u_norm = 0.0;
    Vec z;       // u / ||u||
};

struct ParamGradients {
    Mat dW;
    Vec db;
    Mat dV;
    Vec dc;

    static ParamGradients zeros(const EncoderHead& enc, const ClassifierHead& cls);
};

/// z = u/||u|| with u = tanh(Wx + b). Throws on degenerate ||u|| < 1e-12.
ForwardCache forward(const EncoderHead& head, const Vec& x);

/// Backprop dL/dz through normalization and tanh. Accumulates into dW/db and
/// returns dL/dx.
Vec backward(const EncoderHead& head, const ForwardCache& cache, const Vec& dL_dz,
             Mat& dW, Vec& db);

Vec classify(const ClassifierHead& cls, const Vec& z);

}  // namespace rap
