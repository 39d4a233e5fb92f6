#include "rap/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>

#include "rap/kernels.hpp"

namespace rap {

using nlohmann::json;

void TrainConfig::validate() const {
    if (loss.tau <= 0) throw Error("config: tau must be positive");
    if (loss.alpha <= 0) throw Error("config: alpha must be positive");
    if (loss.omega < 0) throw Error("config: omega must be nonnegative");
    if (loss.lambda < 0 || loss.lambda > 1) throw Error("config: lambda must be in [0,1]");
    if (epochs < 0 || batch_size < 1 || warmup_epochs < 0 || early_stop_patience < 1)
        throw Error("config: invalid training schedule");
    if (hidden_dim < 1) throw Error("config: hidden_dim must be positive");
    if (k_mode == KMode::Fixed && k_fixed < 1) throw Error("config: k must be positive");
}

void apply_config_entry(TrainConfig& cfg, const std::string& key, const std::string& value) {
    auto as_double = [&] { return std::stod(value); };
    auto as_int = [&] { return std::stoi(value); };
    if (key == "tau") cfg.loss.tau = as_double();
    else if (key == "alpha") cfg.loss.alpha = as_double();
    else if (key == "omega") cfg.loss.omega = as_double();
    else if (key == "lambda") cfg.loss.lambda = as_double();
    else if (key == "eps_dist") cfg.loss.eps_dist = as_double();
    else if (key == "use_apdl") cfg.loss.use_apdl = (value == "true" || value == "1");
    else if (key == "epochs") cfg.epochs = as_int();
    else if (key == "batch_size") cfg.batch_size = as_int();
    else if (key == "learning_rate") cfg.learning_rate = as_double();
    else if (key == "warmup_epochs") cfg.warmup_epochs = as_int();
    else if (key == "early_stop_patience") cfg.early_stop_patience = as_int();
    else if (key == "grad_clip") cfg.grad_clip = as_double();
    else if (key == "hidden_dim") cfg.hidden_dim = as_int();
    else if (key == "seed") cfg.seed = std::stoull(value);
    else if (key == "drop_ratio") cfg.estimate_drop_ratio = as_double();
    else if (key == "k") {
        if (value == "C" || value == "ground-truth") cfg.k_mode = KMode::GroundTruth;
        else if (value == "estimate") cfg.k_mode = KMode::Estimate;
        else { cfg.k_mode = KMode::Fixed; cfg.k_fixed = as_int(); }
    } else {
        throw Error("config: unknown key '" + key + "'");
    }
}

TrainConfig parse_config_file(const std::string& path, TrainConfig base) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config file: " + path);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            if (line.find_first_not_of(" \t\r") != std::string::npos)
                throw Error("config line " + std::to_string(line_no) + ": expected key = value");
            continue;
        }
        auto trim = [](std::string s) {
            auto a = s.find_first_not_of(" \t\r");
            auto b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
        if (key.empty()) throw Error("config line " + std::to_string(line_no) + ": empty key");
        try {
            apply_config_entry(base, key, value);
        } catch (const std::invalid_argument&) {
            throw Error("config line " + std::to_string(line_no) + ": bad value for '" + key + "'");
        }
    }
    return base;
}

namespace {

void clip_inplace(Mat& g, double max_norm) {
    if (max_norm <= 0) return;
    double n = g.norm();
    if (n > max_norm) g *= max_norm / n;
}
void clip_inplace(Vec& g, double max_norm) {
    if (max_norm <= 0) return;
    double n = g.norm();
    if (n > max_norm) g *= max_norm / n;
}

std::vector<int> dense_labels(const std::vector<Sample>& samples) {
    std::map<std::string, int> ids;
    for (const auto& s : samples) {
        const std::string& l = s.label ? *s.label : (s.eval_label ? *s.eval_label : std::string());
        ids.emplace(l, 0);
    }
    int next = 0;
    for (auto& [k, v] : ids) v = next++;
    std::vector<int> out;
    out.reserve(samples.size());
    for (const auto& s : samples) {
        const std::string& l = s.label ? *s.label : (s.eval_label ? *s.eval_label : std::string());
        out.push_back(ids[l]);
    }
    return out;
}

bool has_eval_labels(const std::vector<Sample>& samples) {
    for (const auto& s : samples)
        if (!s.label && !s.eval_label) return false;
    return !samples.empty();
}

// Hungarian alignment of clusters to known class indices using the labeled
// subset's overlap; unmatched clusters receive novel indices.
std::vector<int> align_clusters(const std::vector<int>& cluster_of, int k,
                                const std::vector<int>& labeled_idx,
                                const std::vector<int>& known_target, int n_known) {
    int m = std::max(k, n_known);
    Mat overlap = Mat::Zero(m, m);
    for (std::size_t t = 0; t < labeled_idx.size(); ++t)
        overlap(cluster_of[labeled_idx[t]], known_target[t]) += 1.0;
    double mx = labeled_idx.empty() ? 1.0 : static_cast<double>(labeled_idx.size());
    Mat cost = Mat::Constant(m, m, mx) - overlap;
    AssignmentMapping am = hungarian(cost);

    std::vector<int> class_of(k, -1);
    for (int c = 0; c < k; ++c)
        if (am.map[c] < n_known) class_of[c] = am.map[c];
    int next_novel = n_known;
    for (int c = 0; c < k; ++c)
        if (class_of[c] < 0) class_of[c] = next_novel++;
    return class_of;
}

struct EvalView {
    std::vector<Vec> xs;
    std::vector<int> truth;
};

}  // namespace

void warmup(const std::vector<Vec>& xs, const std::vector<int>& ys, EncoderHead& enc,
            ClassifierHead& cls, const TrainConfig& cfg, Rng& rng) {
    if (xs.empty()) throw Error("warmup: no labeled samples");
    std::vector<int> order(xs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

    for (int e = 0; e < cfg.warmup_epochs; ++e) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            std::size_t end = std::min(order.size(), start + cfg.batch_size);
            Batch batch;
            for (std::size_t t = start; t < end; ++t) {
                batch.x.push_back(xs[order[t]]);
                batch.z.push_back(forward(enc, xs[order[t]]).z);
                batch.y.push_back(ys[order[t]]);
                batch.labeled.push_back(1);
            }
            LossValue ce = ce_loss(batch, cls);
            Mat dW = Mat::Zero(enc.W.rows(), enc.W.cols());
            Vec db = Vec::Zero(enc.b.size());
            for (std::size_t t = start; t < end; ++t) {
                ForwardCache cache = forward(enc, xs[order[t]]);
                backward(enc, cache, ce.d_z[t - start], dW, db);
            }
            clip_inplace(dW, cfg.grad_clip);
            clip_inplace(db, cfg.grad_clip);
            clip_inplace(ce.dV, cfg.grad_clip);
            clip_inplace(ce.dc, cfg.grad_clip);
            enc.W -= cfg.learning_rate * dW;
            enc.b -= cfg.learning_rate * db;
            cls.V -= cfg.learning_rate * ce.dV;
            cls.c -= cfg.learning_rate * ce.dc;
        }
    }
}

TrainResult train(const Dataset& dataset, const TrainConfig& cfg) {
    cfg.validate();
    if (dataset.labeled.empty()) throw Error("train: labeled split is empty");
    const int n_known = dataset.task.known_count();
    Rng rng(cfg.seed);

    // Hold out 10% of labeled data for early-stopping validation.
    std::vector<int> lab_order(dataset.labeled.size());
    for (std::size_t i = 0; i < lab_order.size(); ++i) lab_order[i] = static_cast<int>(i);
    rng.shuffle(lab_order);
    std::size_t n_val = dataset.labeled.size() >= 10
                            ? static_cast<std::size_t>(std::lround(0.1 * dataset.labeled.size()))
                            : (dataset.labeled.size() > 1 ? 1 : 0);
    std::vector<int> val_idx(lab_order.begin(), lab_order.begin() + n_val);
    std::vector<int> lab_idx(lab_order.begin() + n_val, lab_order.end());

    // Training pool: labeled (train part) first, then unlabeled.
    std::vector<Vec> pool_x;
    std::vector<int> pool_known;  // known class index or -1
    for (int i : lab_idx) {
        pool_x.push_back(dataset.labeled[i].features);
        pool_known.push_back(dataset.task.known_index(*dataset.labeled[i].label));
    }
    for (const auto& s : dataset.unlabeled) {
        pool_x.push_back(s.features);
        pool_known.push_back(-1);
    }
    const std::size_t n_pool = pool_x.size();
    std::vector<int> labeled_pos, labeled_target;
    for (std::size_t i = 0; i < n_pool; ++i)
        if (pool_known[i] >= 0) { labeled_pos.push_back(static_cast<int>(i)); labeled_target.push_back(pool_known[i]); }

    EvalView val;
    for (int i : val_idx) {
        val.xs.push_back(dataset.labeled[i].features);
        val.truth.push_back(dataset.task.known_index(*dataset.labeled[i].label));
    }

    TrainResult res;
    res.model.dim = dataset.dim;
    res.model.known_classes = dataset.task.known_classes;
    res.model.seed = cfg.seed;
    res.model.encoder = EncoderHead::init(dataset.dim, cfg.hidden_dim, rng);
    res.model.classifier = ClassifierHead::init(cfg.hidden_dim, n_known, rng);

    {
        std::vector<Vec> wx;
        std::vector<int> wy;
        for (std::size_t t = 0; t < labeled_pos.size(); ++t) {
            wx.push_back(pool_x[labeled_pos[t]]);
            wy.push_back(labeled_target[t]);
        }
        if (!wx.empty())
            warmup(wx, wy, res.model.encoder, res.model.classifier, cfg, rng);
    }

    int k_use;
    switch (cfg.k_mode) {
        case KMode::GroundTruth: k_use = dataset.task.total_classes; break;
        case KMode::Fixed: k_use = cfg.k_fixed; break;
        case KMode::Estimate: {
            auto zs = kernels::embed_batch(res.model.encoder, pool_x);
            k_use = estimate_k(zs, 2 * dataset.task.total_classes, cfg.estimate_drop_ratio,
                               rng.fork());
            break;
        }
    }
    if (k_use < n_known)
        throw Error("train: cluster count " + std::to_string(k_use) +
                    " is smaller than the known class count");
    res.k_used = k_use;

    // Validation NMI assigns each held-out embedding to its nearest prototype.
    // k-means on the (small) validation split degenerates into singletons, so
    // nearest-prototype assignment is the signal early stopping tracks.
    auto eval_val_nmi = [&](const EncoderHead& enc, const PrototypeSet& protos) {
        if (val.xs.empty() || protos.mu.empty()) return 0.0;
        auto zs = kernels::embed_batch(enc, val.xs);
        std::vector<int> assigned;
        std::vector<double> sq_dists;
        kernels::assign_points(zs, protos.mu, assigned, sq_dists);
        return nmi(val.truth, assigned);
    };

    Model best = res.model;
    double best_nmi = -1.0;
    int best_epoch = 0, wait = 0;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::uint64_t km_seed = rng.fork();

        // (1)-(2) embed the pool and refresh pseudo-labels.
        auto zs = kernels::embed_batch(res.model.encoder, pool_x);
        ClusterAssignment clusters = kmeans(zs, k_use, km_seed);
        std::vector<int> class_of =
            align_clusters(clusters.labels, k_use, labeled_pos, labeled_target, n_known);

        std::vector<int> targets(n_pool);
        for (std::size_t i = 0; i < n_pool; ++i)
            targets[i] = pool_known[i] >= 0 ? pool_known[i] : class_of[clusters.labels[i]];

        // (3) prototypes from the aligned clusters.
        PrototypeSet protos;
        protos.momentum = cfg.loss.lambda;
        protos.mu.assign(k_use, Vec::Zero(cfg.hidden_dim));
        {
            std::vector<int> counts(k_use, 0);
            for (std::size_t i = 0; i < n_pool; ++i) {
                protos.mu[class_of[clusters.labels[i]]] += zs[i];
                ++counts[class_of[clusters.labels[i]]];
            }
            for (int c = 0; c < k_use; ++c)
                if (counts[c] > 0) protos.mu[c] /= counts[c];
                else protos.mu[c] = Vec::Ones(cfg.hidden_dim);  // unreachable after repair
            protos.renormalize();
        }
        // (4) minibatch optimization.
        std::vector<int> order(n_pool);
        for (std::size_t i = 0; i < n_pool; ++i) order[i] = static_cast<int>(i);
        rng.shuffle(order);

        double sum_all = 0, sum_r = 0, sum_a = 0, sum_ce = 0;
        int n_batches = 0;
        for (std::size_t start = 0; start < n_pool; start += cfg.batch_size) {
            std::size_t end = std::min(n_pool, start + cfg.batch_size);
            Batch batch;
            std::vector<ForwardCache> caches;
            for (std::size_t t = start; t < end; ++t) {
                int i = order[t];
                caches.push_back(forward(res.model.encoder, pool_x[i]));
                batch.x.push_back(pool_x[i]);
                batch.z.push_back(caches.back().z);
                batch.y.push_back(targets[i]);
                batch.labeled.push_back(pool_known[i] >= 0 ? 1 : 0);
            }
            MixPairing pairing = MixPairing::sample(batch.size(), cfg.loss.alpha, rng);

            LossValue r = rpal_loss(batch, pairing, protos, cfg.loss.tau, res.model.encoder);
            LossValue ce = ce_loss(batch, res.model.classifier);
            double a_val = 0.0;
            std::vector<Vec> d_mu(k_use, Vec::Zero(cfg.hidden_dim));
            if (cfg.loss.use_apdl) {
                LossValue a = apdl_loss(protos, cfg.loss.tau, cfg.loss.eps_dist);
                a_val = a.value;
                d_mu = std::move(a.d_mu);
            }
            double l_all = cfg.loss.omega * r.value + a_val + ce.value;
            if (!std::isfinite(l_all))
                throw Error("train: non-finite loss at epoch " + std::to_string(epoch));
            sum_all += l_all; sum_r += r.value; sum_a += a_val; sum_ce += ce.value;
            ++n_batches;

            Mat dW = cfg.loss.omega * r.dW;
            Vec db = cfg.loss.omega * r.db;
            for (std::size_t t = 0; t < batch.size(); ++t)
                backward(res.model.encoder, caches[t], ce.d_z[t], dW, db);
            for (int c = 0; c < k_use; ++c) d_mu[c] += cfg.loss.omega * r.d_mu[c];

            Mat d_mu_mat(cfg.hidden_dim, k_use);
            for (int c = 0; c < k_use; ++c) d_mu_mat.col(c) = d_mu[c];
            clip_inplace(dW, cfg.grad_clip);
            clip_inplace(db, cfg.grad_clip);
            clip_inplace(ce.dV, cfg.grad_clip);
            clip_inplace(ce.dc, cfg.grad_clip);
            clip_inplace(d_mu_mat, cfg.grad_clip);

            res.model.encoder.W -= cfg.learning_rate * dW;
            res.model.encoder.b -= cfg.learning_rate * db;
            res.model.classifier.V -= cfg.learning_rate * ce.dV;
            res.model.classifier.c -= cfg.learning_rate * ce.dc;
            for (int c = 0; c < k_use; ++c)
                protos.mu[c] -= cfg.learning_rate * d_mu_mat.col(c);
            protos.renormalize();

            // EMA with the batch-mean embedding of each class present.
            std::map<int, std::pair<Vec, int>> class_mean;
            for (std::size_t t = 0; t < batch.size(); ++t) {
                auto [it, fresh] = class_mean.try_emplace(batch.y[t], batch.z[t], 1);
                if (!fresh) { it->second.first += batch.z[t]; ++it->second.second; }
            }
            for (const auto& [c, acc] : class_mean)
                ema_update(protos, c, acc.first / acc.second);
        }
        res.model.protos = protos;

        // (5) epoch log and early stopping.
        EpochLog log;
        log.epoch = epoch;
        log.l_all = sum_all / n_batches;
        log.l_r = sum_r / n_batches;
        log.l_a = sum_a / n_batches;
        log.l_ce = sum_ce / n_batches;
        log.val_nmi = eval_val_nmi(res.model.encoder, protos);
        {
            auto z_end = kernels::embed_batch(res.model.encoder, pool_x);
            WithinBetween wb = within_between_stats(z_end, targets, protos);
            log.within = wb.within;
            log.between = wb.between;
        }
        res.logs.push_back(log);
        log_debug("epoch " + std::to_string(epoch) + " L_all=" + std::to_string(log.l_all) +
                  " val_nmi=" + std::to_string(log.val_nmi));

        // Snapshot ties go to the later epoch: the validation split is small,
        // so many epochs share the top score and the most-trained of them is
        // kept. Patience still counts epochs without strict improvement.
        if (log.val_nmi >= best_nmi - 1e-12) {
            best = res.model;
            best_epoch = epoch;
        }
        if (log.val_nmi > best_nmi + 1e-12) {
            best_nmi = log.val_nmi;
            wait = 0;
        } else if (++wait >= cfg.early_stop_patience) {
            break;
        }
    }

    if (best_epoch > 0) res.model = best;
    res.best_epoch = best_epoch > 0 ? best_epoch : static_cast<int>(res.logs.size());
    return res;
}

InferResult infer(const EncoderHead& encoder, const std::vector<Sample>& samples, int k,
                  std::uint64_t seed) {
    InferResult out;
    std::vector<Vec> xs;
    xs.reserve(samples.size());
    for (const auto& s : samples) xs.push_back(s.features);
    out.embeddings = kernels::embed_batch(encoder, xs);
    out.assignment = kmeans(out.embeddings, k, seed);
    if (has_eval_labels(samples))
        out.report = evaluate(dense_labels(samples), out.assignment.labels);
    return out;
}

namespace {

json mat_to_json(const Mat& m) {
    json rows = json::array();
    for (int i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Mat mat_from_json(const json& j) {
    Mat m(j.size(), j.empty() ? 0 : j[0].size());
    for (std::size_t i = 0; i < j.size(); ++i)
        for (std::size_t k = 0; k < j[i].size(); ++k) m(i, k) = j[i][k].get<double>();
    return m;
}

json vec_to_json(const Vec& v) {
    return json(std::vector<double>(v.data(), v.data() + v.size()));
}

Vec vec_from_json(const json& j) {
    Vec v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    return v;
}

}  // namespace

void save_checkpoint(const Model& model, const std::string& path) {
    json j;
    j["format"] = "rap-checkpoint";
    j["version"] = 1;
    j["dim"] = model.dim;
    j["hidden_dim"] = model.encoder.out_dim();
    j["seed"] = model.seed;
    j["known_classes"] = model.known_classes;
    j["W"] = mat_to_json(model.encoder.W);
    j["b"] = vec_to_json(model.encoder.b);
    j["V"] = mat_to_json(model.classifier.V);
    j["c"] = vec_to_json(model.classifier.c);
    j["prototype_momentum"] = model.protos.momentum;
    json protos = json::array();
    for (const auto& m : model.protos.mu) protos.push_back(vec_to_json(m));
    j["prototypes"] = protos;
    std::ofstream out(path);
    if (!out) throw Error("cannot write checkpoint: " + path);
    out << j.dump(2) << "\n";
}

Model load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open checkpoint: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw Error("checkpoint parse error: " + std::string(e.what()));
    }
    if (j.value("format", "") != "rap-checkpoint")
        throw Error("not a checkpoint file: " + path);
    if (j.value("version", 0) != 1)
        throw Error("unsupported checkpoint version");
    Model m;
    m.dim = j.at("dim").get<int>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.known_classes = j.at("known_classes").get<std::vector<std::string>>();
    m.encoder.W = mat_from_json(j.at("W"));
    m.encoder.b = vec_from_json(j.at("b"));
    m.classifier.V = mat_from_json(j.at("V"));
    m.classifier.c = vec_from_json(j.at("c"));
    m.protos.momentum = j.at("prototype_momentum").get<double>();
    for (const auto& p : j.at("prototypes")) m.protos.mu.push_back(vec_from_json(p));
    return m;
}

}  // namespace rap
