#include "rap/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <unordered_set>

namespace rap {

using nlohmann::json;

int TaskSpec::known_index(const std::string& name) const {
    auto it = std::lower_bound(known_classes.begin(), known_classes.end(), name);
    if (it == known_classes.end() || *it != name) return -1;
    return static_cast<int>(it - known_classes.begin());
}

Vec mean_pool(const Mat& tokens) {
    if (tokens.rows() < 1) throw Error("mean_pool: token matrix has no rows");
    return tokens.colwise().mean();
}

namespace {

Vec parse_features(const json& rec, int line_no) {
    if (rec.contains("features")) {
        const auto& f = rec["features"];
        if (!f.is_array() || f.empty())
            throw Error("line " + std::to_string(line_no) + ": features must be a nonempty array");
        Vec v(f.size());
        for (std::size_t i = 0; i < f.size(); ++i) v[static_cast<Eigen::Index>(i)] = f[i].get<double>();
        return v;
    }
    if (rec.contains("tokens")) {
        const auto& t = rec["tokens"];
        if (!t.is_array() || t.empty())
            throw Error("line " + std::to_string(line_no) + ": tokens must be a nonempty array of rows");
        std::size_t h = t[0].size();
        Mat m(t.size(), h);
        for (std::size_t r = 0; r < t.size(); ++r) {
            if (!t[r].is_array() || t[r].size() != h)
                throw Error("line " + std::to_string(line_no) + ": token rows have inconsistent width");
            for (std::size_t c = 0; c < h; ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = t[r][c].get<double>();
        }
        return mean_pool(m);
    }
    throw Error("line " + std::to_string(line_no) + ": record has neither 'features' nor 'tokens'");
}

void check_finite(const Vec& v, int line_no) {
    if (!v.allFinite())
        throw Error("line " + std::to_string(line_no) + ": non-finite feature value");
}

}  // namespace

Dataset load_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open dataset file: " + path);

    Dataset ds;
    std::unordered_set<std::string> ids;
    std::string line;
    int line_no = 0;
    bool have_task = false;

    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::parse_error& e) {
            throw Error("line " + std::to_string(line_no) + ": malformed JSON (" + e.what() + ")");
        }

        if (rec.contains("task")) {
            const auto& t = rec["task"];
            for (const auto& c : t.at("known_classes"))
                ds.task.known_classes.push_back(c.get<std::string>());
            std::sort(ds.task.known_classes.begin(), ds.task.known_classes.end());
            ds.task.known_classes.erase(
                std::unique(ds.task.known_classes.begin(), ds.task.known_classes.end()),
                ds.task.known_classes.end());
            ds.task.total_classes = t.at("total_classes").get<int>();
            if (ds.task.novel_count() < 0)
                throw Error("line " + std::to_string(line_no) + ": total_classes smaller than known class count");
            have_task = true;
            continue;
        }

        Sample s;
        s.id = rec.at("id").get<std::string>();
        if (!ids.insert(s.id).second)
            throw Error("line " + std::to_string(line_no) + ": duplicate id '" + s.id + "'");
        s.features = parse_features(rec, line_no);
        check_finite(s.features, line_no);

        if (ds.dim == 0) ds.dim = static_cast<int>(s.features.size());
        else if (s.features.size() != ds.dim)
            throw Error("line " + std::to_string(line_no) + ": dimension mismatch (got " +
                        std::to_string(s.features.size()) + ", expected " + std::to_string(ds.dim) + ")");

        if (rec.contains("label") && !rec["label"].is_null()) s.label = rec["label"].get<std::string>();
        if (rec.contains("eval_label") && !rec["eval_label"].is_null())
            s.eval_label = rec["eval_label"].get<std::string>();

        std::string split = rec.value("split", "unlabeled");
        if (split == "labeled") {
            if (!s.label)
                throw Error("line " + std::to_string(line_no) + ": labeled sample without label");
            if (have_task && ds.task.known_index(*s.label) < 0)
                throw Error("line " + std::to_string(line_no) + ": label '" + *s.label +
                            "' outside the known class set");
            ds.labeled.push_back(std::move(s));
        } else if (split == "unlabeled") {
            ds.unlabeled.push_back(std::move(s));
        } else if (split == "test") {
            ds.test.push_back(std::move(s));
        } else {
            throw Error("line " + std::to_string(line_no) + ": unknown split '" + split + "'");
        }
    }

    if (ds.labeled.empty() && ds.unlabeled.empty() && ds.test.empty())
        throw Error("empty dataset: " + path);
    if (!have_task) {
        // Infer a task from observed labels.
        std::set<std::string> seen;
        for (const auto& s : ds.labeled)
            if (s.label) seen.insert(*s.label);
        ds.task.known_classes.assign(seen.begin(), seen.end());
        ds.task.total_classes = ds.task.known_count();
    }
    for (const auto& s : ds.labeled)
        if (s.label && ds.task.known_index(*s.label) < 0)
            throw Error("labeled sample '" + s.id + "' has label outside the known class set");
    return ds;
}

namespace {

json sample_to_json(const Sample& s, const char* split) {
    json rec;
    rec["id"] = s.id;
    std::vector<double> f(s.features.data(), s.features.data() + s.features.size());
    rec["features"] = f;
    if (s.label) rec["label"] = *s.label;
    if (s.eval_label) rec["eval_label"] = *s.eval_label;
    rec["split"] = split;
    return rec;
}

}  // namespace

void save_jsonl(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write dataset file: " + path);
    json header;
    header["task"] = {{"known_classes", ds.task.known_classes},
                      {"total_classes", ds.task.total_classes}};
    out << header.dump() << "\n";
    for (const auto& s : ds.labeled) out << sample_to_json(s, "labeled").dump() << "\n";
    for (const auto& s : ds.unlabeled) out << sample_to_json(s, "unlabeled").dump() << "\n";
    for (const auto& s : ds.test) out << sample_to_json(s, "test").dump() << "\n";
}

namespace {

std::string class_name(int c) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "c%03d", c);
    return buf;
}

// Rejection-sample k centers in R^d with mutual distance >= sep. Centers are
// drawn inside a random low-dimensional subspace (rank ~ d/4), mimicking real
// feature spaces where class structure occupies far fewer directions than the
// ambient dimension; the isotropic noise added later still spans all of R^d.
// The sampling scale starts tight so typical distances sit close to the
// separation floor; if the packing is infeasible the scale grows until
// placement succeeds.
std::vector<Vec> sample_centers(int k, int d, double sep, Rng& rng) {
    const int r = std::max(2, std::min(d, d / 4));
    Mat basis;
    {
        Mat g(d, r);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < r; ++j) g(i, j) = rng.normal();
        basis = Eigen::HouseholderQR<Mat>(g).householderQ() * Mat::Identity(d, r);
    }
    double scale = sep / std::sqrt(2.0 * r);
    for (;;) {
        std::vector<Vec> coords;
        bool ok = true;
        for (int c = 0; c < k && ok; ++c) {
            bool placed = false;
            for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
                Vec cand(r);
                for (int i = 0; i < r; ++i) cand[i] = rng.normal(0.0, scale);
                placed = true;
                for (const auto& prev : coords)
                    if ((cand - prev).norm() < sep) { placed = false; break; }
                if (placed) coords.push_back(std::move(cand));
            }
            ok = placed;
        }
        if (ok) {
            std::vector<Vec> centers;
            for (const auto& c : coords) centers.push_back(basis * c);
            return centers;
        }
        scale *= 1.2;  // too crowded, spread out and retry
    }
}

}  // namespace

Dataset synth_mixture(const SynthParams& p) {
    if (p.k < 2) throw Error("synth_mixture: k must be >= 2");
    if (p.n_per_class < 1) throw Error("synth_mixture: n_per_class must be >= 1");
    if (p.sep <= 0 || p.sigma <= 0) throw Error("synth_mixture: sep and sigma must be positive");
    int known = static_cast<int>(std::lround(p.known_fraction * p.k));
    if (known == 0) throw Error("synth_mixture: known_fraction yields no known classes");
    known = std::min(known, p.k);

    Rng rng(p.seed);
    auto centers = sample_centers(p.k, p.d, p.sep, rng);

    Dataset ds;
    ds.dim = p.d;
    for (int c = 0; c < known; ++c) ds.task.known_classes.push_back(class_name(c));
    ds.task.total_classes = p.k;

    int labeled_per_class = static_cast<int>(std::lround(p.labeled_fraction * p.n_per_class));
    int sid = 0;
    for (int c = 0; c < p.k; ++c) {
        for (int i = 0; i < p.n_per_class; ++i) {
            Sample s;
            char buf[16];
            std::snprintf(buf, sizeof(buf), "s%06d", sid++);
            s.id = buf;
            s.features = centers[c];
            for (int j = 0; j < p.d; ++j) s.features[j] += rng.normal(0.0, p.sigma);
            bool is_known = c < known;
            if (is_known && i < labeled_per_class) {
                s.label = class_name(c);
                ds.labeled.push_back(std::move(s));
            } else {
                s.eval_label = class_name(c);
                ds.unlabeled.push_back(std::move(s));
            }
        }
    }
    return ds;
}

}  // namespace rap
