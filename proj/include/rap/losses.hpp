#pragma once

#include <vector>

#include "rap/encoder.hpp"
#include "rap/prototypes.hpp"

namespace rap {

struct Batch {
    std::vector<Vec> x;        // encoder inputs
    std::vector<Vec> z;        // unit-norm embeddings, forward(x)
    std::vector<int> y;        // targets: ground truth or pseudo-label
    std::vector<char> labeled; // mask for the cross-entropy term

    std::size_t size() const { return z.size(); }
};

/// Scalar loss plus analytic gradients for whichever parameters the loss
/// touches. Empty containers mean "no gradient for this parameter group".
struct LossValue {
    double value = 0.0;
    std::vector<Vec> d_z;
    std::vector<Vec> d_mu;
    Mat dW;  // encoder gradients (losses that forward through the encoder)
    Vec db;
    Mat dV;  // classifier gradients
    Vec dc;
};

struct LossConfig {
    double tau = 0.1;
    double alpha = 1.0;      // Beta(alpha, alpha) for mixup
    double omega = 2.0;      // weight of the attracting term
    double lambda = 0.9;     // EMA momentum
    double eps_dist = 1e-6;  // floor on prototype distance
    bool use_apdl = true;    // ablation switch
};

/// Prototypical contrastive loss over dot-product similarities z.mu/tau.
LossValue pcl_loss(const Batch& batch, const PrototypeSet& protos, double tau);

Vec mixup(const Vec& x_a, const Vec& x_b, double eta);

/// Per-anchor pairing for the interpolation strategy.
struct MixPairing {
    std::vector<int> partner;  // partner[a] = index of x_b in the batch
    std::vector<double> eta;

    static MixPairing sample(std::size_t n, double alpha, Rng& rng);
};

/// Interpolation-attracting loss: forwards each mixed input through the
/// encoder and combines the two prototypical terms with weights eta, 1-eta.
/// Gradients land in dW/db (through the mixed forwards) and d_mu.
LossValue rpal_loss(const Batch& batch, const MixPairing& pairing,
                    const PrototypeSet& protos, double tau, const EncoderHead& encoder);

/// Instance-wise alignment + uniformity baseline over two views
/// (z has 2N entries, positives are (i, i+N)).
LossValue instance_contrastive_loss(const std::vector<Vec>& z, double tau);

/// Prototype dispersing loss, distance-reciprocal weighted.
LossValue apdl_loss(const PrototypeSet& protos, double tau, double eps_dist);

/// Mean cross-entropy of the classifier over labeled batch entries.
LossValue ce_loss(const Batch& batch, const ClassifierHead& cls);

/// L_all = omega * L_r + L_a + L_ce (L_a dropped when use_apdl is off).
LossValue multitask_loss(const Batch& batch, const MixPairing& pairing,
                         const PrototypeSet& protos, const ClassifierHead& cls,
                         const LossConfig& cfg, const EncoderHead& encoder);

}  // namespace rap
