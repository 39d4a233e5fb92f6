#include <CLI11.hpp>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <nlohmann/json.hpp>

#include "rap/dataset.hpp"
#include "rap/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint64_t fnv1a64_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw rap::Error("cannot hash file: " + path);
    std::uint64_t h = 1469598103934665603ull;
    char buf[4096];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ull;
        }
    }
    std::ostringstream os;
    return h;
}

json config_snapshot(const rap::TrainConfig& cfg) {
    json j;
    j["tau"] = cfg.loss.tau;
    j["alpha"] = cfg.loss.alpha;
    j["omega"] = cfg.loss.omega;
    j["lambda"] = cfg.loss.lambda;
    j["eps_dist"] = cfg.loss.eps_dist;
    j["use_apdl"] = cfg.loss.use_apdl;
    j["epochs"] = cfg.epochs;
    j["batch_size"] = cfg.batch_size;
    j["learning_rate"] = cfg.learning_rate;
    j["warmup_epochs"] = cfg.warmup_epochs;
    j["early_stop_patience"] = cfg.early_stop_patience;
    j["grad_clip"] = cfg.grad_clip;
    j["hidden_dim"] = cfg.hidden_dim;
    j["seed"] = cfg.seed;
    j["drop_ratio"] = cfg.estimate_drop_ratio;
    switch (cfg.k_mode) {
        case rap::KMode::GroundTruth: j["k"] = "C"; break;
        case rap::KMode::Estimate: j["k"] = "estimate"; break;
        case rap::KMode::Fixed: j["k"] = cfg.k_fixed; break;
    }
    return j;
}

void check_dims(const rap::Model& model, const rap::Dataset& ds) {
    if (model.dim != ds.dim)
        throw rap::Error("checkpoint dimension (" + std::to_string(model.dim) +
                         ") does not match dataset dimension (" + std::to_string(ds.dim) + ")");
}

int infer_k_flag(const std::string& k_flag, const rap::Dataset& ds) {
    if (k_flag.empty() || k_flag == "C") return ds.task.total_classes;
    return std::stoi(k_flag);
}

int cmd_synth(const rap::SynthParams& p, const std::string& out) {
    rap::Dataset ds = rap::synth_mixture(p);
    rap::save_jsonl(ds, out);
    std::cout << "wrote " << out << ": " << ds.labeled.size() << " labeled, "
              << ds.unlabeled.size() << " unlabeled, d=" << ds.dim << ", known classes "
              << ds.task.known_count() << "/" << ds.task.total_classes << "\n";
    return 0;
}

int cmd_train(const std::string& data, const std::string& config_path,
              const std::string& out_dir, const std::vector<std::string>& overrides) {
    rap::TrainConfig cfg;
    if (!config_path.empty()) cfg = rap::parse_config_file(config_path);
    for (const auto& ov : overrides) {
        auto eq = ov.find('=');
        if (eq == std::string::npos) throw rap::Error("override must be key=value: " + ov);
        rap::apply_config_entry(cfg, ov.substr(0, eq), ov.substr(eq + 1));
    }
    rap::Dataset ds = rap::load_jsonl(data);
    rap::log_info("training on " + data + " (" + std::to_string(ds.labeled.size()) +
                  " labeled, " + std::to_string(ds.unlabeled.size()) + " unlabeled)");
    rap::TrainResult res = rap::train(ds, cfg);

    fs::create_directories(out_dir);
    std::string ckpt = (fs::path(out_dir) / "checkpoint.json").string();
    rap::save_checkpoint(res.model, ckpt);

    std::string csv_path = (fs::path(out_dir) / "epochs.csv").string();
    {
        std::ofstream csv(csv_path);
        csv << "epoch,L_all,L_r,L_a,L_ce,val_nmi,within,between\n";
        csv << std::setprecision(17);
        for (const auto& log : res.logs)
            csv << log.epoch << "," << log.l_all << "," << log.l_r << "," << log.l_a << ","
                << log.l_ce << "," << log.val_nmi << "," << log.within << "," << log.between
                << "\n";
    }

    json manifest;
    manifest["config"] = config_snapshot(cfg);
    manifest["seed"] = cfg.seed;
    manifest["dataset"] = {{"path", data},
                           {"fnv1a64", fnv1a64_file(data)}};
    manifest["artifacts"] = {{"checkpoint", ckpt}, {"epoch_log", csv_path}};
    manifest["best_epoch"] = res.best_epoch;
    manifest["k_used"] = res.k_used;
    if (!res.logs.empty())
        manifest["best_val_nmi"] = res.logs[res.best_epoch - 1].val_nmi;
    std::ofstream mf(fs::path(out_dir) / "manifest.json");
    mf << manifest.dump(2) << "\n";

    std::cout << "trained " << res.logs.size() << " epochs (best " << res.best_epoch
              << "), artifacts in " << out_dir << "\n";
    return 0;
}

int cmd_eval(const std::string& data, const std::string& ckpt, const std::string& k_flag,
             std::uint64_t seed, const std::string& json_out, const std::string& dump_csv) {
    rap::Dataset ds = rap::load_jsonl(data);
    rap::Model model = rap::load_checkpoint(ckpt);
    check_dims(model, ds);
    int k = infer_k_flag(k_flag, ds);
    const auto& samples = ds.eval_split();
    rap::InferResult res = rap::infer(model.encoder, samples, k, seed);

    json j;
    j["k"] = k;
    j["n"] = samples.size();
    if (res.report) {
        const auto& r = *res.report;
        std::cout << std::fixed << std::setprecision(4);
        std::cout << "metric   value\n";
        std::cout << "NMI      " << r.nmi << "\n";
        std::cout << "ARI      " << r.ari << "\n";
        std::cout << "ACC      " << r.acc << "\n";
        j["nmi"] = r.nmi;
        j["ari"] = r.ari;
        j["acc"] = r.acc;
        j["cluster_sizes"] = r.cluster_sizes;
    } else {
        std::cout << "no evaluation labels present; clustered " << samples.size()
                  << " samples into " << k << " clusters\n";
    }
    if (model.protos.count() > 0 && res.report) {
        // Within/between on the predicted assignment against the checkpoint
        // prototypes, reported raw and x100.
        std::vector<int> labels = res.assignment.labels;
        if (model.protos.count() >= k) {
            rap::WithinBetween wb =
                rap::within_between_stats(res.embeddings, labels, model.protos);
            std::cout << "within   " << wb.within << "  (x100: " << 100 * wb.within << ")\n";
            std::cout << "between  " << wb.between << "  (x100: " << 100 * wb.between << ")\n";
            j["within"] = wb.within;
            j["between"] = wb.between;
        }
    }
    if (!json_out.empty()) {
        std::ofstream out(json_out);
        out << j.dump(2) << "\n";
    }
    if (!dump_csv.empty()) {
        std::ofstream out(dump_csv);
        out << "id";
        for (int h = 0; h < model.encoder.out_dim(); ++h) out << ",z" << h;
        out << ",cluster,eval_label\n";
        out << std::setprecision(17);
        for (std::size_t i = 0; i < samples.size(); ++i) {
            out << samples[i].id;
            for (int h = 0; h < model.encoder.out_dim(); ++h)
                out << "," << res.embeddings[i][h];
            const auto& s = samples[i];
            out << "," << res.assignment.labels[i] << ","
                << (s.label ? *s.label : (s.eval_label ? *s.eval_label : "")) << "\n";
        }
    }
    return 0;
}

int cmd_estimate_k(const std::string& data, const std::string& ckpt, const std::string& k_init_flag,
                   double drop_ratio, std::uint64_t seed) {
    rap::Dataset ds = rap::load_jsonl(data);
    std::vector<rap::Vec> points;
    std::vector<std::string> ids;
    std::vector<const rap::Sample*> all;
    for (const auto& s : ds.labeled) all.push_back(&s);
    for (const auto& s : ds.unlabeled) all.push_back(&s);
    if (!ckpt.empty()) {
        rap::Model model = rap::load_checkpoint(ckpt);
        check_dims(model, ds);
        std::vector<rap::Vec> xs;
        for (const auto* s : all) xs.push_back(s->features);
        for (const auto& x : xs) points.push_back(rap::forward(model.encoder, x).z);
    } else {
        for (const auto* s : all) points.push_back(s->features);
    }

    int k_init;
    if (k_init_flag == "2x") k_init = 2 * ds.task.total_classes;
    else k_init = std::stoi(k_init_flag);

    int est = rap::estimate_k(points, k_init, drop_ratio, seed);
    std::cout << "estimated K: " << est << "\n";
    if (ds.task.total_classes > 0) {
        double err = 100.0 * std::abs(est - ds.task.total_classes) / ds.task.total_classes;
        std::cout << "ground truth C: " << ds.task.total_classes << "  (error "
                  << std::fixed << std::setprecision(2) << err << "%)\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"RAP prototype-guided representation learning for new-category discovery"};
    app.require_subcommand(1);

    rap::SynthParams sp;
    std::string synth_out;
    auto* synth = app.add_subcommand("synth", "generate a synthetic mixture dataset");
    synth->add_option("--k", sp.k, "number of classes");
    synth->add_option("--n", sp.n_per_class, "samples per class");
    synth->add_option("--d", sp.d, "feature dimension");
    synth->add_option("--sep", sp.sep, "minimum center separation");
    synth->add_option("--sigma", sp.sigma, "within-class stddev");
    synth->add_option("--labeled-frac", sp.labeled_fraction, "labeled fraction of known classes");
    synth->add_option("--known-frac", sp.known_fraction, "fraction of known classes");
    synth->add_option("--seed", sp.seed, "PRNG seed");
    synth->add_option("-o,--out", synth_out, "output JSONL path")->required();

    std::string data, config_path, out_dir;
    std::vector<std::string> overrides;
    auto* train = app.add_subcommand("train", "train the RAP model");
    train->add_option("--data", data, "dataset JSONL")->required();
    train->add_option("--config", config_path, "key = value config file");
    train->add_option("--out", out_dir, "output directory")->required();
    train->add_option("--set", overrides, "config override key=value (repeatable)");
    train->add_option("--seed", [&overrides](const std::vector<std::string>& v) {
        overrides.push_back("seed=" + v[0]); return true; }, "seed override");
    train->add_option("--omega", [&overrides](const std::vector<std::string>& v) {
        overrides.push_back("omega=" + v[0]); return true; }, "omega override");

    std::string eval_data, eval_ckpt, eval_k, eval_json, eval_dump;
    std::uint64_t eval_seed = 0;
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
    eval->add_option("--data", eval_data, "dataset JSONL")->required();
    eval->add_option("--ckpt", eval_ckpt, "checkpoint path")->required();
    eval->add_option("--k", eval_k, "cluster count (default: ground-truth C)");
    eval->add_option("--seed", eval_seed, "k-means seed");
    eval->add_option("--json", eval_json, "write metrics JSON here");
    eval->add_option("--dump-embeddings", eval_dump, "write embeddings CSV here");

    std::string est_data, est_ckpt, est_kinit = "2x";
    double est_drop = 0.5;
    std::uint64_t est_seed = 0;
    auto* est = app.add_subcommand("estimate-k", "estimate the number of clusters");
    est->add_option("--data", est_data, "dataset JSONL")->required();
    est->add_option("--ckpt", est_ckpt, "checkpoint (omit to use raw features)");
    est->add_option("--k-init", est_kinit, "initial cluster count, or '2x' for 2*C");
    est->add_option("--drop-ratio", est_drop, "size threshold ratio");
    est->add_option("--seed", est_seed, "k-means seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) return cmd_synth(sp, synth_out);
        if (train->parsed()) return cmd_train(data, config_path, out_dir, overrides);
        if (eval->parsed())
            return cmd_eval(eval_data, eval_ckpt, eval_k, eval_seed, eval_json, eval_dump);
        if (est->parsed()) return cmd_estimate_k(est_data, est_ckpt, est_kinit, est_drop, est_seed);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
