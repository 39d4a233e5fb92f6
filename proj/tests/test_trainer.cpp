#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <utility>

#include "rap/trainer.hpp"

using namespace rap;

namespace {

Dataset small_dataset(std::uint64_t seed = 7) {
    SynthParams sp;
    sp.k = 4;
    sp.n_per_class = 20;
    sp.d = 4;
    sp.sep = 8.0;
    sp.sigma = 1.0;
    sp.labeled_fraction = 0.3;
    sp.known_fraction = 0.5;
    sp.seed = seed;
    return synth_mixture(sp);
}

TrainConfig small_config() {
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 16;
    cfg.warmup_epochs = 1;
    cfg.hidden_dim = 8;
    cfg.seed = 11;
    return cfg;
}

bool same_params(const Model& a, const Model& b) {
    return (a.encoder.W - b.encoder.W).norm() == 0.0 &&
           (a.encoder.b - b.encoder.b).norm() == 0.0 &&
           (a.classifier.V - b.classifier.V).norm() == 0.0 &&
           (a.classifier.c - b.classifier.c).norm() == 0.0;
}

}  // namespace

TEST_CASE("config entries cover every key and reject unknown ones") {
    TrainConfig cfg;
    apply_config_entry(cfg, "tau", "0.2");
    apply_config_entry(cfg, "omega", "1.5");
    apply_config_entry(cfg, "lambda", "0.8");
    apply_config_entry(cfg, "alpha", "2.0");
    apply_config_entry(cfg, "eps_dist", "1e-5");
    apply_config_entry(cfg, "use_apdl", "false");
    apply_config_entry(cfg, "epochs", "7");
    apply_config_entry(cfg, "batch_size", "32");
    apply_config_entry(cfg, "learning_rate", "0.01");
    apply_config_entry(cfg, "warmup_epochs", "2");
    apply_config_entry(cfg, "early_stop_patience", "9");
    apply_config_entry(cfg, "grad_clip", "3");
    apply_config_entry(cfg, "hidden_dim", "16");
    apply_config_entry(cfg, "seed", "42");
    apply_config_entry(cfg, "drop_ratio", "0.4");
    apply_config_entry(cfg, "k", "estimate");
    CHECK(cfg.loss.tau == 0.2);
    CHECK(cfg.loss.omega == 1.5);
    CHECK(cfg.loss.lambda == 0.8);
    CHECK(cfg.loss.use_apdl == false);
    CHECK(cfg.epochs == 7);
    CHECK(cfg.batch_size == 32);
    CHECK(cfg.warmup_epochs == 2);
    CHECK(cfg.early_stop_patience == 9);
    CHECK(cfg.hidden_dim == 16);
    CHECK(cfg.seed == 42);
    CHECK(cfg.estimate_drop_ratio == 0.4);
    CHECK(cfg.k_mode == KMode::Estimate);
    apply_config_entry(cfg, "k", "C");
    CHECK(cfg.k_mode == KMode::GroundTruth);
    apply_config_entry(cfg, "k", "12");
    CHECK(cfg.k_mode == KMode::Fixed);
    CHECK(cfg.k_fixed == 12);

    CHECK_THROWS_WITH_AS(apply_config_entry(cfg, "bogus_key", "1"),
                         doctest::Contains("bogus_key"), Error);
}

TEST_CASE("config file parsing honours comments and overrides") {
    const char* path = "trainer_test_run.cfg";
    {
        std::ofstream out(path);
        out << "# comment line\n";
        out << "epochs = 9\n";
        out << "tau=0.5\n";
        out << "\n";
        out << "k = 6  # trailing comment\n";
    }
    TrainConfig cfg = parse_config_file(path);
    CHECK(cfg.epochs == 9);
    CHECK(cfg.loss.tau == 0.5);
    CHECK(cfg.k_mode == KMode::Fixed);
    CHECK(cfg.k_fixed == 6);
    std::remove(path);
    CHECK_THROWS_AS(parse_config_file("no_such_file.cfg"), Error);
}

TEST_CASE("config validation rejects bad values") {
    TrainConfig cfg;
    cfg.loss.tau = 0.0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = TrainConfig{};
    cfg.loss.lambda = 1.5;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = TrainConfig{};
    cfg.batch_size = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    CHECK_NOTHROW(TrainConfig{}.validate());
}

TEST_CASE("warmup with zero epochs leaves parameters untouched") {
    Rng rng(3);
    EncoderHead enc = EncoderHead::init(4, 8, rng);
    ClassifierHead cls = ClassifierHead::init(8, 2, rng);
    EncoderHead enc0 = enc;
    ClassifierHead cls0 = cls;
    TrainConfig cfg = small_config();
    cfg.warmup_epochs = 0;
    std::vector<Vec> xs = {Vec::Ones(4), -Vec::Ones(4)};
    std::vector<int> ys = {0, 1};
    Rng wrng(5);
    warmup(xs, ys, enc, cls, cfg, wrng);
    CHECK((enc.W - enc0.W).norm() == 0.0);
    CHECK((cls.V - cls0.V).norm() == 0.0);
}

TEST_CASE("warmup drives CE down on separable data and is deterministic") {
    Dataset data = small_dataset();
    std::vector<Vec> xs;
    std::vector<int> ys;
    for (const auto& s : data.labeled) {
        xs.push_back(s.features);
        ys.push_back(data.task.known_index(*s.label));
    }
    TrainConfig cfg = small_config();
    cfg.warmup_epochs = 8;

    auto run = [&]() {
        Rng rng(17);
        EncoderHead enc = EncoderHead::init(data.dim, cfg.hidden_dim, rng);
        ClassifierHead cls =
            ClassifierHead::init(cfg.hidden_dim, static_cast<int>(data.task.known_classes.size()), rng);
        Rng wrng(19);
        warmup(xs, ys, enc, cls, cfg, wrng);
        return std::pair{enc, cls};
    };
    auto [enc1, cls1] = run();
    auto [enc2, cls2] = run();
    CHECK((enc1.W - enc2.W).norm() == 0.0);
    CHECK((cls1.V - cls2.V).norm() == 0.0);

    // A trained classifier should beat the untrained one on its own data.
    Rng rng(17);
    EncoderHead enc0 = EncoderHead::init(data.dim, cfg.hidden_dim, rng);
    ClassifierHead cls0 =
        ClassifierHead::init(cfg.hidden_dim, static_cast<int>(data.task.known_classes.size()), rng);
    auto mean_ce = [&](const EncoderHead& e, const ClassifierHead& c) {
        Batch b;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            b.x.push_back(xs[i]);
            b.z.push_back(forward(e, xs[i]).z);
            b.y.push_back(ys[i]);
            b.labeled.push_back(1);
        }
        return ce_loss(b, c).value;
    };
    CHECK(mean_ce(enc1, cls1) < mean_ce(enc0, cls0));
}

TEST_CASE("frozen system: zero learning rate changes nothing") {
    Dataset data = small_dataset();
    TrainConfig cfg = small_config();
    cfg.learning_rate = 0.0;
    cfg.loss.omega = 0.0;
    cfg.loss.lambda = 1.0;
    TrainResult r = train(data, cfg);

    Rng rng(cfg.seed);
    // train() draws the validation shuffle before initializing the heads;
    // replay that draw so the parameter comparison starts from the same state.
    std::vector<int> order(data.labeled.size());
    rng.shuffle(order);
    EncoderHead enc0 = EncoderHead::init(data.dim, cfg.hidden_dim, rng);
    ClassifierHead cls0 =
        ClassifierHead::init(cfg.hidden_dim, static_cast<int>(data.task.known_classes.size()), rng);
    CHECK((r.model.encoder.W - enc0.W).norm() == 0.0);
    CHECK((r.model.encoder.b - enc0.b).norm() == 0.0);
    CHECK((r.model.classifier.V - cls0.V).norm() == 0.0);
    CHECK((r.model.classifier.c - cls0.c).norm() == 0.0);
}

TEST_CASE("train is deterministic and prototype count stays C") {
    Dataset data = small_dataset();
    TrainConfig cfg = small_config();
    TrainResult a = train(data, cfg);
    TrainResult b = train(data, cfg);
    CHECK(same_params(a.model, b.model));
    CHECK(a.logs.size() == b.logs.size());
    for (std::size_t i = 0; i < a.logs.size(); ++i) {
        CHECK(a.logs[i].l_all == b.logs[i].l_all);
        CHECK(a.logs[i].val_nmi == b.logs[i].val_nmi);
        CHECK(std::isfinite(a.logs[i].l_all));
        CHECK(std::isfinite(a.logs[i].within));
    }
    CHECK(a.k_used == 4);
    CHECK(a.model.protos.mu.size() == 4);
    for (const auto& mu : a.model.protos.mu)
        CHECK(mu.norm() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("early stopping caps the epoch count") {
    Dataset data = small_dataset();
    TrainConfig cfg = small_config();
    cfg.epochs = 40;
    cfg.early_stop_patience = 3;
    TrainResult r = train(data, cfg);
    CHECK(static_cast<int>(r.logs.size()) <= cfg.epochs);
    if (static_cast<int>(r.logs.size()) < cfg.epochs)
        CHECK(static_cast<int>(r.logs.size()) == r.best_epoch + cfg.early_stop_patience);
}

TEST_CASE("checkpoint round-trip preserves the model") {
    Dataset data = small_dataset();
    TrainConfig cfg = small_config();
    TrainResult r = train(data, cfg);
    const char* path = "trainer_test_ckpt.json";
    save_checkpoint(r.model, path);
    Model loaded = load_checkpoint(path);
    std::remove(path);
    CHECK(same_params(r.model, loaded));
    CHECK(loaded.known_classes == r.model.known_classes);
    CHECK(loaded.dim == r.model.dim);
    CHECK(loaded.protos.mu.size() == r.model.protos.mu.size());
    for (std::size_t c = 0; c < loaded.protos.mu.size(); ++c)
        CHECK((loaded.protos.mu[c] - r.model.protos.mu[c]).norm() == 0.0);
    CHECK_THROWS_AS(load_checkpoint("no_such_ckpt.json"), Error);
}

TEST_CASE("infer with k=1 gives ACC equal to the majority class frequency") {
    Dataset data = small_dataset();
    TrainConfig cfg = small_config();
    TrainResult r = train(data, cfg);
    const auto& pool = data.eval_split();
    InferResult inf = infer(r.model.encoder, pool, 1, 5);
    REQUIRE(inf.report.has_value());
    std::map<std::string, int> freq;
    for (const auto& s : pool) ++freq[*s.eval_label];
    int max_freq = 0;
    for (const auto& [_, f] : freq) max_freq = std::max(max_freq, f);
    CHECK(inf.report->acc ==
          doctest::Approx(static_cast<double>(max_freq) / pool.size()).epsilon(1e-12));

    InferResult again = infer(r.model.encoder, pool, 1, 5);
    CHECK(again.assignment.labels == inf.assignment.labels);
}

TEST_CASE("infer is idempotent for a nontrivial k") {
    Dataset data = small_dataset();
    TrainConfig cfg = small_config();
    TrainResult r = train(data, cfg);
    InferResult a = infer(r.model.encoder, data.eval_split(), 4, 9);
    InferResult b = infer(r.model.encoder, data.eval_split(), 4, 9);
    CHECK(a.assignment.labels == b.assignment.labels);
    REQUIRE(a.report.has_value());
    CHECK(a.report->nmi == b.report->nmi);
}
