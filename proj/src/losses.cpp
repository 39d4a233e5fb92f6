#include "rap/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rap {

namespace {

// Softmax of logits with max-shift; returns log-sum-exp.
double softmax_inplace(Vec& logits) {
    double m = logits.maxCoeff();
    logits = (logits.array() - m).exp();
    double s = logits.sum();
    logits /= s;
    return m + std::log(s);
}

// d cos(a,b)/da for general (not necessarily unit) vectors.
Vec d_cos_da(const Vec& a, const Vec& b, double cos_ab) {
    double na = a.norm(), nb = b.norm();
    return b / (na * nb) - cos_ab * a / (na * na);
}

double cosine(const Vec& a, const Vec& b) {
    return a.dot(b) / (a.norm() * b.norm());
}

void ensure_finite(const LossValue& lv, const char* what) {
    if (!std::isfinite(lv.value)) throw Error(std::string(what) + ": non-finite loss value");
}

}  // namespace

LossValue pcl_loss(const Batch& batch, const PrototypeSet& protos, double tau) {
    if (batch.size() == 0) throw Error("pcl_loss: empty batch");
    if (tau <= 0) throw Error("pcl_loss: tau must be positive");
    const int C = protos.count();
    const double n = static_cast<double>(batch.size());

    LossValue lv;
    lv.d_z.assign(batch.size(), Vec::Zero(batch.z[0].size()));
    lv.d_mu.assign(C, Vec::Zero(protos.mu[0].size()));

    for (std::size_t i = 0; i < batch.size(); ++i) {
        const Vec& z = batch.z[i];
        int y = batch.y[i];
        if (y < 0 || y >= C) throw Error("pcl_loss: target outside prototype range");
        Vec p(C);
        for (int k = 0; k < C; ++k) p[k] = z.dot(protos.mu[k]) / tau;
        double target_logit = p[y];
        double lse = softmax_inplace(p);  // p now holds probabilities
        lv.value += (lse - target_logit) / n;
        for (int k = 0; k < C; ++k) {
            double coef = (p[k] - (k == y ? 1.0 : 0.0)) / (tau * n);
            lv.d_z[i] += coef * protos.mu[k];
            lv.d_mu[k] += coef * z;
        }
    }
    ensure_finite(lv, "pcl_loss");
    return lv;
}

Vec mixup(const Vec& x_a, const Vec& x_b, double eta) {
    if (x_a.size() != x_b.size()) throw Error("mixup: dimension mismatch");
    return eta * x_a + (1.0 - eta) * x_b;
}

MixPairing MixPairing::sample(std::size_t n, double alpha, Rng& rng) {
    MixPairing p;
    p.partner.resize(n);
    for (std::size_t i = 0; i < n; ++i) p.partner[i] = static_cast<int>(i);
    rng.shuffle(p.partner);
    p.eta.resize(n);
    for (std::size_t i = 0; i < n; ++i) p.eta[i] = rng.beta(alpha);
    return p;
}

LossValue rpal_loss(const Batch& batch, const MixPairing& pairing,
                    const PrototypeSet& protos, double tau, const EncoderHead& encoder) {
    if (batch.size() == 0) throw Error("rpal_loss: empty batch");
    if (pairing.partner.size() != batch.size() || pairing.eta.size() != batch.size())
        throw Error("rpal_loss: pairing does not cover the batch");
    const int C = protos.count();
    const double n = static_cast<double>(batch.size());

    LossValue lv;
    lv.d_mu.assign(C, Vec::Zero(protos.mu[0].size()));
    lv.dW = Mat::Zero(encoder.W.rows(), encoder.W.cols());
    lv.db = Vec::Zero(encoder.b.size());

    for (std::size_t a = 0; a < batch.size(); ++a) {
        int b = pairing.partner[a];
        double eta = pairing.eta[a];
        int ya = batch.y[a], yb = batch.y[b];
        Vec xm = mixup(batch.x[a], batch.x[static_cast<std::size_t>(b)], eta);
        ForwardCache cache = forward(encoder, xm);

        Vec p(C);
        for (int k = 0; k < C; ++k) p[k] = cache.z.dot(protos.mu[k]) / tau;
        double la = p[ya], lb = p[yb];
        double lse = softmax_inplace(p);
        lv.value += (eta * (lse - la) + (1.0 - eta) * (lse - lb)) / n;

        Vec d_z = Vec::Zero(cache.z.size());
        for (int k = 0; k < C; ++k) {
            double coef = (p[k] - eta * (k == ya ? 1.0 : 0.0) -
                           (1.0 - eta) * (k == yb ? 1.0 : 0.0)) / (tau * n);
            d_z += coef * protos.mu[k];
            lv.d_mu[k] += coef * cache.z;
        }
        backward(encoder, cache, d_z, lv.dW, lv.db);
    }
    ensure_finite(lv, "rpal_loss");
    return lv;
}

LossValue instance_contrastive_loss(const std::vector<Vec>& z, double tau) {
    if (z.size() < 2 || z.size() % 2 != 0)
        throw Error("instance_contrastive_loss: need an even number (2N) of views");
    const std::size_t n2 = z.size(), n = n2 / 2;

    LossValue lv;
    lv.d_z.assign(n2, Vec::Zero(z[0].size()));

    // Alignment over positive pairs.
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t j = i + n;
        double cs = cosine(z[i], z[j]);
        lv.value -= cs / (tau * static_cast<double>(n));
        lv.d_z[i] -= d_cos_da(z[i], z[j], cs) / (tau * static_cast<double>(n));
        lv.d_z[j] -= d_cos_da(z[j], z[i], cs) / (tau * static_cast<double>(n));
    }

    // Uniformity: mean_i log sum_{k != i} exp(cos(z_i, z_k)/tau).
    for (std::size_t i = 0; i < n2; ++i) {
        std::vector<double> s(n2, 0.0);
        double m = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < n2; ++k) {
            if (k == i) continue;
            s[k] = cosine(z[i], z[k]) / tau;
            m = std::max(m, s[k]);
        }
        double sum = 0.0;
        for (std::size_t k = 0; k < n2; ++k)
            if (k != i) sum += std::exp(s[k] - m);
        lv.value += (m + std::log(sum)) / static_cast<double>(n2);
        for (std::size_t k = 0; k < n2; ++k) {
            if (k == i) continue;
            double w = std::exp(s[k] - m) / sum / (tau * static_cast<double>(n2));
            double cs = s[k] * tau;
            lv.d_z[i] += w * d_cos_da(z[i], z[k], cs);
            lv.d_z[k] += w * d_cos_da(z[k], z[i], cs);
        }
    }
    ensure_finite(lv, "instance_contrastive_loss");
    return lv;
}

LossValue apdl_loss(const PrototypeSet& protos, double tau, double eps_dist) {
    const int C = protos.count();
    if (C < 2) throw Error("apdl_loss: need at least two prototypes");

    LossValue lv;
    lv.d_mu.assign(C, Vec::Zero(protos.mu[0].size()));

    // t_ij = log D_ij + s_ij with D = 1/max(dist, eps) and s = cos/tau.
    for (int i = 0; i < C; ++i) {
        std::vector<double> t(C, 0.0);
        double m = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < C; ++j) {
            if (j == i) continue;
            double dist = (protos.mu[i] - protos.mu[j]).norm();
            double s = cosine(protos.mu[i], protos.mu[j]) / tau;
            t[j] = -std::log(std::max(dist, eps_dist)) + s;
            m = std::max(m, t[j]);
        }
        double sum = 0.0;
        for (int j = 0; j < C; ++j)
            if (j != i) sum += std::exp(t[j] - m);
        lv.value += (m + std::log(sum) - std::log(static_cast<double>(C - 1))) / C;

        for (int j = 0; j < C; ++j) {
            if (j == i) continue;
            double r = std::exp(t[j] - m) / sum / C;  // responsibility of pair (i,j)
            double dist = (protos.mu[i] - protos.mu[j]).norm();
            double cs = cosine(protos.mu[i], protos.mu[j]);
            // d log D = -(mu_i - mu_j)/dist^2 (zero below the floor).
            if (dist > eps_dist) {
                Vec dd = (protos.mu[i] - protos.mu[j]) / (dist * dist);
                lv.d_mu[i] -= r * dd;
                lv.d_mu[j] += r * dd;
            }
            lv.d_mu[i] += r / tau * d_cos_da(protos.mu[i], protos.mu[j], cs);
            lv.d_mu[j] += r / tau * d_cos_da(protos.mu[j], protos.mu[i], cs);
        }
    }
    ensure_finite(lv, "apdl_loss");
    return lv;
}

LossValue ce_loss(const Batch& batch, const ClassifierHead& cls) {
    const int K = static_cast<int>(cls.V.rows());
    LossValue lv;
    lv.d_z.assign(batch.size(), Vec::Zero(cls.V.cols()));
    lv.dV = Mat::Zero(cls.V.rows(), cls.V.cols());
    lv.dc = Vec::Zero(cls.c.size());

    int n_lab = 0;
    for (std::size_t i = 0; i < batch.size(); ++i)
        if (batch.labeled[i]) ++n_lab;
    if (n_lab == 0) return lv;  // zero loss, zero gradients

    for (std::size_t i = 0; i < batch.size(); ++i) {
        if (!batch.labeled[i]) continue;
        int y = batch.y[i];
        if (y < 0 || y >= K) throw Error("ce_loss: label outside the known class set");
        Vec p = classify(cls, batch.z[i]);
        double target_logit = p[y];
        double lse = softmax_inplace(p);
        lv.value += (lse - target_logit) / n_lab;
        p[y] -= 1.0;
        p /= static_cast<double>(n_lab);
        lv.d_z[i] = cls.V.transpose() * p;
        lv.dV.noalias() += p * batch.z[i].transpose();
        lv.dc += p;
    }
    ensure_finite(lv, "ce_loss");
    return lv;
}

LossValue multitask_loss(const Batch& batch, const MixPairing& pairing,
                         const PrototypeSet& protos, const ClassifierHead& cls,
                         const LossConfig& cfg, const EncoderHead& encoder) {
    LossValue r = rpal_loss(batch, pairing, protos, cfg.tau, encoder);
    LossValue ce = ce_loss(batch, cls);

    LossValue lv;
    lv.value = cfg.omega * r.value + ce.value;
    lv.d_z = ce.d_z;  // only the CE term pulls on the batch embeddings directly
    lv.d_mu.assign(protos.count(), Vec::Zero(protos.mu[0].size()));
    for (int k = 0; k < protos.count(); ++k) lv.d_mu[k] = cfg.omega * r.d_mu[k];
    lv.dW = cfg.omega * r.dW;
    lv.db = cfg.omega * r.db;
    lv.dV = ce.dV;
    lv.dc = ce.dc;

    if (cfg.use_apdl) {
        LossValue a = apdl_loss(protos, cfg.tau, cfg.eps_dist);
        lv.value += a.value;
        for (int k = 0; k < protos.count(); ++k) lv.d_mu[k] += a.d_mu[k];
    }
    ensure_finite(lv, "multitask_loss");
    return lv;
}

}  // namespace rap
