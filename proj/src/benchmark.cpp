#include "specnhmc/benchmark.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <map>
#include <set>
#include <tuple>

#include "json.hpp"
#include "specnhmc/error.hpp"
#include "specnhmc/labeling.hpp"
#include "specnhmc/parallel.hpp"
#include "specnhmc/semantics.hpp"
#include "text_util.hpp"

namespace specnhmc {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Features and classifiers

FeatureSet extract_features(FeatureKind kind, const SpectralLibrary& lib, const std::vector<CoeffMatrix>& coeffs,
                            const NhmcModel* gmm, const MogModel* mog) {
    if (coeffs.size() != lib.size()) throw DimensionError("coefficient list and library differ in size");
    const bool needs_gmm = kind == FeatureKind::gmm_labels || kind == FeatureKind::gmm_sign;
    const bool needs_mog = kind == FeatureKind::mog_labels || kind == FeatureKind::mog_sign;
    if (needs_gmm && !gmm) throw ValidationError(to_string(kind) + " features need a GMM model");
    if (needs_mog && !mog) throw ValidationError(to_string(kind) + " features need a MOG model");

    FeatureSet out;
    out.kind = kind;
    out.vectors.reserve(lib.size());
    for (std::size_t i = 0; i < lib.size(); ++i) {
        const auto& c = coeffs[i];
        out.class_ids.push_back(lib.spectra[i].class_id);
        switch (kind) {
            case FeatureKind::spectrum:
                out.vectors.push_back(lib.spectra[i].reflectance);
                break;
            case FeatureKind::coeffs:
                out.vectors.push_back(c.values.data());
                break;
            case FeatureKind::gmm_labels:
                out.vectors.push_back(label_coeffs(c, *gmm).flatten());
                break;
            case FeatureKind::gmm_sign:
                out.vectors.push_back(add_signs(label_coeffs(c, *gmm), c).flatten());
                break;
            case FeatureKind::mog_labels:
                out.vectors.push_back(label_coeffs_mog(c, *mog).flatten());
                break;
            case FeatureKind::mog_sign:
                out.vectors.push_back(add_signs(label_coeffs_mog(c, *mog), c).flatten());
                break;
            case FeatureKind::rivard:
                out.vectors.push_back(rivard_lcp(c, default_lcp_scales(c.levels())));
                break;
        }
    }
    return out;
}

ClassifierSpec classifier_from_string(const std::string& name) {
    if (name == "svm") return {ClassifierSpec::Type::svm, NnMetric::l2};
    if (name.rfind("nn-", 0) == 0) return {ClassifierSpec::Type::nn, nn_metric_from_string(name.substr(3))};
    throw ValidationError("unknown classifier '" + name + "' (expected nn-l1, nn-l2, nn-cosine or svm)");
}

ClassificationOutcome classify_features(const FeatureSet& train, const FeatureSet& test, const ClassifierSpec& spec,
                                        const SvmOptions& svm_options) {
    train.validate();
    test.validate();
    if (train.dimension() != test.dimension()) throw DimensionError("train and test features differ in dimension");
    ClassificationOutcome out;
    out.predictions.reserve(test.size());
    if (spec.type == ClassifierSpec::Type::nn) {
        for (const auto& q : test.vectors) out.predictions.push_back(nn_classify(train, q, spec.metric));
    } else {
        out.svm = svm_train(train, svm_options);
        for (const auto& q : test.vectors) out.predictions.push_back(svm_predict(*out.svm, q));
    }
    out.accuracy = evaluate_accuracy(out.predictions, test.class_ids);
    return out;
}

// ---------------------------------------------------------------------------
// Configuration

namespace {

/// One JSON object of the config; rejects keys outside `allowed` up front.
class Section {
public:
    Section(const json& j, std::string path, std::initializer_list<const char*> allowed) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError("config key '" + where() + "' must be an object");
        std::set<std::string> ok(allowed.begin(), allowed.end());
        for (const auto& [key, value] : j_.items()) {
            if (!ok.count(key)) throw ConfigError("unknown config key '" + full(key) + "'");
        }
    }

    bool has(const char* key) const { return j_.contains(key); }
    const json& raw(const char* key) const { return j_.at(key); }
    std::string full(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    void read(const char* key, double& out) const {
        if (!has(key)) return;
        if (!raw(key).is_number()) bad(key, "a number");
        out = raw(key).get<double>();
    }
    void read(const char* key, std::size_t& out) const {
        if (!has(key)) return;
        if (!raw(key).is_number_unsigned() && !(raw(key).is_number_integer() && raw(key).get<long long>() >= 0))
            bad(key, "a non-negative integer");
        out = raw(key).get<std::size_t>();
    }
    void read(const char* key, std::uint64_t& out, int) const {
        if (!has(key)) return;
        if (!raw(key).is_number_unsigned() && !(raw(key).is_number_integer() && raw(key).get<long long>() >= 0))
            bad(key, "a non-negative integer");
        out = raw(key).get<std::uint64_t>();
    }
    void read(const char* key, bool& out) const {
        if (!has(key)) return;
        if (!raw(key).is_boolean()) bad(key, "true or false");
        out = raw(key).get<bool>();
    }
    void read(const char* key, std::string& out) const {
        if (!has(key)) return;
        if (!raw(key).is_string()) bad(key, "a string");
        out = raw(key).get<std::string>();
    }
    template <typename T>
    void read_list(const char* key, std::vector<T>& out) const {
        if (!has(key)) return;
        const auto& v = raw(key);
        if (!v.is_array() || v.empty()) bad(key, "a non-empty array");
        std::vector<T> tmp;
        for (const auto& e : v) {
            if constexpr (std::is_same_v<T, std::string>) {
                if (!e.is_string()) bad(key, "an array of strings");
                tmp.push_back(e.get<std::string>());
            } else if constexpr (std::is_same_v<T, double>) {
                if (!e.is_number()) bad(key, "an array of numbers");
                tmp.push_back(e.get<double>());
            } else {
                if (!e.is_number_integer() || e.get<long long>() < 0) bad(key, "an array of non-negative integers");
                tmp.push_back(e.get<T>());
            }
        }
        out = std::move(tmp);
    }

    [[noreturn]] void bad(const char* key, const std::string& expected) const {
        throw ConfigError("config key '" + full(key) + "' must be " + expected);
    }

private:
    std::string where() const { return path_.empty() ? "<root>" : path_; }

    const json& j_;
    std::string path_;
};

template <typename T>
void require_unique(const std::vector<T>& v, const std::string& key) {
    std::vector<T> s = v;
    std::sort(s.begin(), s.end());
    if (std::adjacent_find(s.begin(), s.end()) != s.end()) throw ConfigError("config key '" + key + "' has duplicate values");
}

}  // namespace

BenchmarkConfig parse_benchmark_config(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    BenchmarkConfig c;
    const Section top(root, "", {"seed", "data", "preprocess", "balance", "split", "sweep", "model", "svm", "output"});
    top.read("seed", c.seed, 0);

    if (top.has("data")) {
        const Section d(top.raw("data"), "data", {"source", "path", "classes", "synthetic"});
        d.read("source", c.source);
        if (c.source != "synthetic" && c.source != "csv") d.bad("source", "\"synthetic\" or \"csv\"");
        d.read("path", c.path);
        if (d.has("classes")) {
            std::vector<std::string> names;
            d.read_list("classes", names);
            c.classes = names;
        }
        if (d.has("synthetic")) {
            const Section s(d.raw("synthetic"), "data.synthetic",
                            {"dip_centers_um", "min_per_class", "max_per_class", "depth_min", "depth_max", "width_min_um",
                             "width_max_um", "center_jitter_um", "offset_min", "offset_max", "slope_min", "slope_max",
                             "noise_sigma"});
            s.read_list("dip_centers_um", c.synthetic.dip_centers_um);
            s.read("min_per_class", c.synthetic.min_per_class);
            s.read("max_per_class", c.synthetic.max_per_class);
            s.read("depth_min", c.synthetic.depth_min);
            s.read("depth_max", c.synthetic.depth_max);
            s.read("width_min_um", c.synthetic.width_min_um);
            s.read("width_max_um", c.synthetic.width_max_um);
            s.read("center_jitter_um", c.synthetic.center_jitter_um);
            s.read("offset_min", c.synthetic.offset_min);
            s.read("offset_max", c.synthetic.offset_max);
            s.read("slope_min", c.synthetic.slope_min);
            s.read("slope_max", c.synthetic.slope_max);
            s.read("noise_sigma", c.synthetic.noise_sigma);
        }
    }
    if (c.source == "csv" && c.path.empty()) throw ConfigError("config key 'data.path' is required when data.source is \"csv\"");

    if (top.has("preprocess")) {
        const Section p(top.raw("preprocess"), "preprocess", {"lo_um", "hi_um", "step_um"});
        p.read("lo_um", c.preprocess.lo_um);
        p.read("hi_um", c.preprocess.hi_um);
        p.read("step_um", c.preprocess.step_um);
        if (!(c.preprocess.step_um > 0.0)) p.bad("step_um", "positive");
        if (!(c.preprocess.hi_um > c.preprocess.lo_um)) p.bad("hi_um", "greater than preprocess.lo_um");
    }
    if (top.has("balance")) {
        const Section b(top.raw("balance"), "balance", {"target_per_class"});
        b.read("target_per_class", c.balance_target);
    }
    if (top.has("split")) {
        const Section s(top.raw("split"), "split", {"train_per_class", "test_per_class", "test_from_train"});
        s.read("train_per_class", c.train_per_class);
        s.read("test_per_class", c.test_per_class);
        s.read("test_from_train", c.test_from_train);
        if (c.train_per_class == 0) s.bad("train_per_class", "at least 1");
    }
    if (top.has("sweep")) {
        const Section s(top.raw("sweep"), "sweep", {"dmp", "k", "features", "classifiers"});
        s.read_list("dmp", c.dmp_values);
        s.read_list("k", c.k_values);
        if (s.has("features")) {
            std::vector<std::string> names;
            s.read_list("features", names);
            c.features.clear();
            for (const auto& n : names) {
                try {
                    c.features.push_back(feature_kind_from_string(n));
                } catch (const ValidationError&) {
                    throw ConfigError("config key 'sweep.features': unknown feature kind '" + n + "'");
                }
            }
        }
        if (s.has("classifiers")) {
            std::vector<std::string> names;
            s.read_list("classifiers", names);
            c.classifiers.clear();
            for (const auto& n : names) {
                try {
                    c.classifiers.push_back(classifier_from_string(n));
                } catch (const ValidationError&) {
                    throw ConfigError("config key 'sweep.classifiers': unknown classifier '" + n + "'");
                }
            }
        }
        for (double d : c.dmp_values)
            if (!(d > 1.0 / 9.0 && d <= 1.0)) throw ConfigError("config key 'sweep.dmp': values must lie in (1/9, 1]");
        for (std::size_t k : c.k_values)
            if (k < 2) throw ConfigError("config key 'sweep.k': values must be at least 2");
    }
    require_unique(c.dmp_values, "sweep.dmp");
    require_unique(c.k_values, "sweep.k");
    require_unique(c.features, "sweep.features");
    {
        std::vector<std::string> labels;
        for (const auto& cl : c.classifiers) labels.push_back(cl.label());
        require_unique(labels, "sweep.classifiers");
    }

    if (top.has("model")) {
        const Section m(top.raw("model"), "model", {"levels", "wavelet", "max_iter", "tol"});
        m.read("levels", c.levels);
        std::string w = to_string(c.wavelet);
        m.read("wavelet", w);
        try {
            c.wavelet = wavelet_from_string(w);
        } catch (const ValidationError&) {
            m.bad("wavelet", "\"haar\" or \"db4\"");
        }
        m.read("max_iter", c.max_iter);
        m.read("tol", c.tol);
        if (c.levels == 0) m.bad("levels", "at least 1");
        if (c.max_iter == 0) m.bad("max_iter", "at least 1");
        if (!(c.tol > 0.0)) m.bad("tol", "positive");
    }
    if (top.has("svm")) {
        const Section s(top.raw("svm"), "svm", {"folds", "c_values", "gamma_values"});
        s.read("folds", c.svm_folds);
        s.read_list("c_values", c.svm_grid.c_values);
        s.read_list("gamma_values", c.svm_grid.gamma_values);
        if (c.svm_folds < 2) s.bad("folds", "at least 2");
        for (double v : c.svm_grid.c_values)
            if (!(v > 0.0)) s.bad("c_values", "positive");
        for (double v : c.svm_grid.gamma_values)
            if (!(v > 0.0)) s.bad("gamma_values", "positive");
    }
    if (top.has("output")) {
        const Section o(top.raw("output"), "output", {"dir", "save_models", "save_svm_models"});
        o.read("dir", c.output_dir);
        o.read("save_models", c.save_models);
        o.read("save_svm_models", c.save_svm_models);
    }
    return c;
}

BenchmarkConfig load_benchmark_config(const std::string& path) {
    std::string text;
    try {
        text = detail::read_file(path);
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    return parse_benchmark_config(text);
}

std::string benchmark_config_to_json(const BenchmarkConfig& c) {
    json j;
    j["seed"] = c.seed;
    json data{{"source", c.source}, {"path", c.path}};
    if (c.classes) data["classes"] = *c.classes;
    const auto& s = c.synthetic;
    data["synthetic"] = {{"dip_centers_um", s.dip_centers_um}, {"min_per_class", s.min_per_class},
                         {"max_per_class", s.max_per_class},   {"depth_min", s.depth_min},
                         {"depth_max", s.depth_max},           {"width_min_um", s.width_min_um},
                         {"width_max_um", s.width_max_um},     {"center_jitter_um", s.center_jitter_um},
                         {"offset_min", s.offset_min},         {"offset_max", s.offset_max},
                         {"slope_min", s.slope_min},           {"slope_max", s.slope_max},
                         {"noise_sigma", s.noise_sigma}};
    j["data"] = data;
    j["preprocess"] = {{"lo_um", c.preprocess.lo_um}, {"hi_um", c.preprocess.hi_um}, {"step_um", c.preprocess.step_um}};
    j["balance"] = {{"target_per_class", c.balance_target}};
    j["split"] = {{"train_per_class", c.train_per_class},
                  {"test_per_class", c.test_per_class},
                  {"test_from_train", c.test_from_train}};
    std::vector<std::string> features;
    for (auto f : c.features) features.push_back(to_string(f));
    std::vector<std::string> classifiers;
    for (const auto& cl : c.classifiers) classifiers.push_back(cl.label());
    j["sweep"] = {{"dmp", c.dmp_values}, {"k", c.k_values}, {"features", features}, {"classifiers", classifiers}};
    j["model"] = {{"levels", c.levels}, {"wavelet", to_string(c.wavelet)}, {"max_iter", c.max_iter}, {"tol", c.tol}};
    j["svm"] = {{"folds", c.svm_folds}, {"c_values", c.svm_grid.c_values}, {"gamma_values", c.svm_grid.gamma_values}};
    j["output"] = {{"dir", c.output_dir}, {"save_models", c.save_models}, {"save_svm_models", c.save_svm_models}};
    return j.dump(1) + "\n";
}

// ---------------------------------------------------------------------------
// Sweep

namespace {

namespace fs = std::filesystem;

std::string resolve(const std::string& workspace, const std::string& path) {
    const fs::path p(path);
    return p.is_absolute() ? p.string() : (fs::path(workspace) / p).string();
}

std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string dmp_tag(double dmp) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%.3f", dmp);
    return buf;
}

std::string csv_safe(std::string s) {
    for (char& ch : s) {
        if (ch == ',') ch = ';';
        if (ch == '\n' || ch == '\r') ch = ' ';
    }
    return s;
}

// Seed offsets keep the stages' random streams independent.
constexpr std::uint64_t kSynthSeed = 0;
constexpr std::uint64_t kBalanceSeed = 1;
constexpr std::uint64_t kSplitSeed = 2;
constexpr std::uint64_t kBlurSeed = 3;
constexpr std::uint64_t kEmSeed = 4;
constexpr std::uint64_t kSvmSeed = 5;

struct Job {
    double dmp = 1.0;
    std::optional<std::size_t> k;  // empty: features without a chain model
};

struct JobResult {
    std::vector<ReportRow> rows;
    std::vector<std::string> model_files;
    std::vector<std::string> warnings;
};

struct Split {
    std::set<std::string> train_ids;
    std::set<std::string> test_ids;
};

SpectralLibrary subset(const SpectralLibrary& lib, const std::set<std::string>& ids) {
    SpectralLibrary out;
    out.grid = lib.grid;
    out.class_names = lib.class_names;
    for (const auto& s : lib.spectra)
        if (ids.count(s.sample_id)) out.spectra.push_back(s);
    return out;
}

std::vector<CoeffMatrix> transform_all(const SpectralLibrary& lib, const BenchmarkConfig& c) {
    std::vector<CoeffMatrix> out;
    out.reserve(lib.size());
    for (const auto& s : lib.spectra) out.push_back(uwt(s.reflectance, c.levels, c.wavelet));
    return out;
}

std::string error_status(const std::exception& e) { return csv_safe(std::string("error: ") + e.what()); }

class JobRunner {
public:
    JobRunner(const BenchmarkConfig& c, const SpectralLibrary& lib, const Split& split, std::string out_dir,
              std::size_t train_workers)
        : c_(c), lib_(lib), split_(split), out_dir_(std::move(out_dir)), train_workers_(train_workers) {}

    JobResult run(const Job& job) const {
        JobResult result;
        std::vector<FeatureKind> kinds;
        for (auto f : c_.features)
            if (is_nhmc_feature(f) == job.k.has_value()) kinds.push_back(f);

        const auto start = std::chrono::steady_clock::now();
        SpectralLibrary train;
        SpectralLibrary test;
        std::vector<CoeffMatrix> train_coeffs;
        std::vector<CoeffMatrix> test_coeffs;
        std::optional<NhmcModel> gmm;
        std::optional<MogModel> mog;
        try {
            const auto blurred = blur_library(lib_, job.dmp, c_.seed + kBlurSeed).library;
            train = subset(blurred, split_.train_ids);
            test = c_.test_from_train ? train : subset(blurred, split_.test_ids);
            train_coeffs = transform_all(train, c_);
            test_coeffs = c_.test_from_train ? train_coeffs : transform_all(test, c_);
            if (job.k) {
                TrainConfig tc;
                tc.em.max_iter = c_.max_iter;
                tc.em.tol = c_.tol;
                tc.em.seed = c_.seed + kEmSeed;
                tc.workers = train_workers_;
                gmm = train_model(train_coeffs, *job.k, tc);
                gmm->grid = train.grid;
                mog = collapse_model(*gmm);
                const std::string tag = "dmp" + dmp_tag(job.dmp) + "_k" + std::to_string(*job.k);
                if (!gmm->warnings.empty())
                    result.warnings.push_back(tag + ": " + std::to_string(gmm->warnings.size()) + " EM warnings");
                if (!mog->warnings.empty())
                    result.warnings.push_back(tag + ": " + std::to_string(mog->warnings.size()) + " collapse warnings");
                if (c_.save_models) {
                    const std::string g = "models/gmm_" + tag + ".json";
                    const std::string m = "models/mog_" + tag + ".json";
                    detail::write_file(out_dir_ + "/" + g, model_to_json(*gmm));
                    detail::write_file(out_dir_ + "/" + m, mog_model_to_json(*mog));
                    result.model_files.push_back(g);
                    result.model_files.push_back(m);
                }
            }
        } catch (const std::exception& e) {
            const double elapsed = seconds_since(start);
            for (auto f : kinds)
                for (const auto& cl : c_.classifiers) push_rows(result, job, f, cl, std::nullopt, error_status(e), elapsed);
            return result;
        }
        const double shared = seconds_since(start);

        SvmOptions svm;
        svm.grid = c_.svm_grid;
        svm.folds = c_.svm_folds;
        svm.seed = c_.seed + kSvmSeed;
        for (auto f : kinds) {
            const auto fstart = std::chrono::steady_clock::now();
            std::optional<FeatureSet> ftrain;
            std::optional<FeatureSet> ftest;
            std::string failure;
            try {
                ftrain = extract_features(f, train, train_coeffs, gmm ? &*gmm : nullptr, mog ? &*mog : nullptr);
                ftest = c_.test_from_train
                            ? ftrain
                            : extract_features(f, test, test_coeffs, gmm ? &*gmm : nullptr, mog ? &*mog : nullptr);
            } catch (const std::exception& e) {
                failure = error_status(e);
            }
            const double feature_time = seconds_since(fstart);
            for (const auto& cl : c_.classifiers) {
                const auto cstart = std::chrono::steady_clock::now();
                if (!failure.empty()) {
                    push_rows(result, job, f, cl, std::nullopt, failure, shared + feature_time);
                    continue;
                }
                try {
                    auto outcome = classify_features(*ftrain, *ftest, cl, svm);
                    if (outcome.svm) {
                        for (const auto& w : outcome.svm->warnings) result.warnings.push_back(to_string(f) + " svm: " + w);
                        if (c_.save_svm_models) {
                            const std::string name = "models/svm_" + to_string(f) + "_dmp" + dmp_tag(job.dmp) +
                                                     (job.k ? "_k" + std::to_string(*job.k) : std::string{}) + ".json";
                            detail::write_file(out_dir_ + "/" + name, svm_model_to_json(*outcome.svm));
                            result.model_files.push_back(name);
                        }
                    }
                    push_rows(result, job, f, cl, outcome.accuracy.overall, "ok",
                              shared + feature_time + seconds_since(cstart));
                } catch (const std::exception& e) {
                    push_rows(result, job, f, cl, std::nullopt, error_status(e),
                              shared + feature_time + seconds_since(cstart));
                }
            }
        }
        return result;
    }

private:
    static double seconds_since(std::chrono::steady_clock::time_point t) {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
    }

    /// Features without a chain model do not depend on k; their single result
    /// fills the row of every k in the sweep.
    void push_rows(JobResult& result, const Job& job, FeatureKind f, const ClassifierSpec& cl,
                   std::optional<double> accuracy, const std::string& status, double runtime) const {
        const std::vector<std::size_t> ks = job.k ? std::vector<std::size_t>{*job.k} : c_.k_values;
        for (std::size_t k : ks) {
            ReportRow r;
            r.feature = f;
            r.classifier = cl.classifier_name();
            r.metric = cl.metric_name();
            r.dmp = job.dmp;
            r.k = k;
            r.accuracy = accuracy;
            r.status = status;
            r.runtime_s = runtime;
            result.rows.push_back(std::move(r));
        }
    }

    const BenchmarkConfig& c_;
    const SpectralLibrary& lib_;
    const Split& split_;
    std::string out_dir_;
    std::size_t train_workers_;
};

auto row_key(const ReportRow& r) { return std::make_tuple(to_string(r.feature), r.classifier, r.metric, r.dmp, r.k); }

}  // namespace

SpectralLibrary prepare_library(const BenchmarkConfig& c, const std::string& workspace) {
    SpectralLibrary lib;
    if (c.source == "synthetic") {
        SyntheticOptions opts = c.synthetic;
        opts.lo_um = c.preprocess.lo_um;
        opts.hi_um = c.preprocess.hi_um;
        opts.step_um = c.preprocess.step_um;
        lib = synthesize_library(opts, c.seed + kSynthSeed).library;
    } else {
        lib = load_library(resolve(workspace, c.path), c.classes);
    }
    lib = preprocess(lib, c.preprocess).library;
    if (c.balance_target > 0) lib = balance_classes(lib, c.balance_target, c.seed + kBalanceSeed).library;
    return lib;
}

BenchmarkReport run_benchmark(const BenchmarkConfig& c, const std::string& workspace, std::size_t workers) {
    const auto start = std::chrono::steady_clock::now();
    BenchmarkReport report;
    report.seed = c.seed;
    report.config_hash = fnv1a_hex(benchmark_config_to_json(c));
    const std::string out_dir = resolve(workspace, c.output_dir);

    const SpectralLibrary lib = prepare_library(c, workspace);
    Split split;
    {
        auto [train, test] = split_train_test(lib, c.train_per_class, c.test_from_train ? 0 : c.test_per_class,
                                              c.seed + kSplitSeed);
        for (const auto& s : train.spectra) split.train_ids.insert(s.sample_id);
        for (const auto& s : test.spectra) split.test_ids.insert(s.sample_id);
    }

    const bool any_plain = std::any_of(c.features.begin(), c.features.end(), [](auto f) { return !is_nhmc_feature(f); });
    const bool any_chain = std::any_of(c.features.begin(), c.features.end(), is_nhmc_feature);
    std::vector<Job> jobs;
    for (double dmp : c.dmp_values) {
        if (any_plain) jobs.push_back({dmp, std::nullopt});
        if (any_chain)
            for (std::size_t k : c.k_values) jobs.push_back({dmp, k});
    }

    workers = std::max<std::size_t>(1, workers);
    const std::size_t train_workers = std::max<std::size_t>(1, workers / std::max<std::size_t>(1, jobs.size()));
    JobRunner runner(c, lib, split, out_dir, train_workers);
    std::vector<JobResult> results(jobs.size());
    parallel_for(jobs.size(), workers, [&](std::size_t i) { results[i] = runner.run(jobs[i]); });

    for (auto& r : results) {
        report.rows.insert(report.rows.end(), r.rows.begin(), r.rows.end());
        report.model_files.insert(report.model_files.end(), r.model_files.begin(), r.model_files.end());
        report.warnings.insert(report.warnings.end(), r.warnings.begin(), r.warnings.end());
    }
    std::sort(report.rows.begin(), report.rows.end(),
              [](const ReportRow& a, const ReportRow& b) { return row_key(a) < row_key(b); });
    std::sort(report.model_files.begin(), report.model_files.end());
    report.total_runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_benchmark_outputs(report, out_dir);
    return report;
}

// ---------------------------------------------------------------------------
// Report formats

std::string format_report_csv(const BenchmarkReport& report) {
    std::string out = "feature_kind,classifier,metric,dmp,k,accuracy,status\n";
    for (const auto& r : report.rows) {
        out += to_string(r.feature) + ',' + r.classifier + ',' + r.metric + ',' + detail::format_double(r.dmp) + ',' +
               std::to_string(r.k) + ',' + (r.accuracy ? detail::format_double(*r.accuracy) : std::string{}) + ',' +
               csv_safe(r.status) + '\n';
    }
    return out;
}

std::vector<ReportRow> parse_report_csv(const std::string& text) {
    std::vector<ReportRow> rows;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        const std::string line(detail::trim(std::string_view(text).substr(pos, end - pos)));
        pos = end + 1;
        ++line_no;
        if (line.empty()) continue;
        if (line_no == 1) {
            if (line.rfind("feature_kind,classifier,metric,dmp,k,accuracy", 0) != 0)
                throw ParseError("report header must start with feature_kind,classifier,metric,dmp,k,accuracy");
            continue;
        }
        const auto f = detail::split_csv(line);
        const std::string where = "report row " + std::to_string(line_no);
        if (f.size() < 6) throw ParseError(where + ": expected at least 6 fields");
        ReportRow r;
        try {
            r.feature = feature_kind_from_string(f[0]);
        } catch (const ValidationError& e) {
            throw ParseError(where + ": " + e.what());
        }
        r.classifier = f[1];
        r.metric = f[2];
        r.dmp = detail::parse_double(f[3], where);
        r.k = static_cast<std::size_t>(detail::parse_int(f[4], where));
        if (!f[5].empty()) r.accuracy = detail::parse_double(f[5], where);
        r.status = f.size() > 6 ? f[6] : "ok";
        rows.push_back(std::move(r));
    }
    return rows;
}

namespace {

struct BestK {
    std::size_t k = 0;
    double accuracy = 0.0;
};

std::map<std::tuple<std::string, std::string, std::string, double>, BestK> best_over_k(const std::vector<ReportRow>& rows) {
    std::map<std::tuple<std::string, std::string, std::string, double>, BestK> best;
    for (const auto& r : rows) {
        if (!r.accuracy) continue;
        const auto key = std::make_tuple(to_string(r.feature), r.classifier, r.metric, r.dmp);
        auto it = best.find(key);
        if (it == best.end() || *r.accuracy > it->second.accuracy ||
            (*r.accuracy == it->second.accuracy && r.k < it->second.k)) {
            best[key] = {r.k, *r.accuracy};
        }
    }
    return best;
}

}  // namespace

std::string format_best_k_csv(const std::vector<ReportRow>& rows) {
    std::string out = "feature_kind,classifier,metric,dmp,best_k,accuracy\n";
    for (const auto& [key, b] : best_over_k(rows)) {
        const auto& [feature, classifier, metric, dmp] = key;
        out += feature + ',' + classifier + ',' + metric + ',' + detail::format_double(dmp) + ',' + std::to_string(b.k) +
               ',' + detail::format_double(b.accuracy) + '\n';
    }
    return out;
}

std::string format_plot_data_csv(const std::vector<ReportRow>& rows) {
    std::string out = "series,feature_kind,classifier,metric,dmp,accuracy\n";
    for (const auto& [key, b] : best_over_k(rows)) {
        const auto& [feature, classifier, metric, dmp] = key;
        const std::string series = feature + "/" + classifier + "-" + metric;
        out += series + ',' + feature + ',' + classifier + ',' + metric + ',' + detail::format_double(dmp) + ',' +
               detail::format_double(b.accuracy) + '\n';
    }
    return out;
}

std::string format_timings_csv(const BenchmarkReport& report) {
    std::string out = "feature_kind,classifier,metric,dmp,k,runtime_s\n";
    char buf[32];
    for (const auto& r : report.rows) {
        std::snprintf(buf, sizeof buf, "%.3f", r.runtime_s);
        out += to_string(r.feature) + ',' + r.classifier + ',' + r.metric + ',' + detail::format_double(r.dmp) + ',' +
               std::to_string(r.k) + ',' + buf + '\n';
    }
    return out;
}

std::string format_summary_text(const BenchmarkReport& report) {
    std::string out;
    char buf[256];
    std::snprintf(buf, sizeof buf, "config hash %s, seed %llu, %zu rows, %.1f s\n\n", report.config_hash.c_str(),
                  static_cast<unsigned long long>(report.seed), report.rows.size(), report.total_runtime_s);
    out += buf;
    std::snprintf(buf, sizeof buf, "%-12s %-5s %-7s %6s %6s %9s\n", "feature", "clf", "metric", "dmp", "best_k", "accuracy");
    out += buf;
    for (const auto& [key, b] : best_over_k(report.rows)) {
        const auto& [feature, classifier, metric, dmp] = key;
        std::snprintf(buf, sizeof buf, "%-12s %-5s %-7s %6.3f %6zu %9.4f\n", feature.c_str(), classifier.c_str(),
                      metric.c_str(), dmp, b.k, b.accuracy);
        out += buf;
    }
    const auto failed = std::count_if(report.rows.begin(), report.rows.end(), [](const auto& r) { return !r.accuracy; });
    if (failed > 0) {
        out += "\nfailed rows:\n";
        for (const auto& r : report.rows) {
            if (r.accuracy) continue;
            std::snprintf(buf, sizeof buf, "  %s %s-%s dmp %.3f k %zu: ", to_string(r.feature).c_str(), r.classifier.c_str(),
                          r.metric.c_str(), r.dmp, r.k);
            out += buf + r.status + "\n";
        }
    }
    if (!report.warnings.empty()) {
        out += "\nwarnings:\n";
        for (const auto& w : report.warnings) out += "  " + w + "\n";
    }
    return out;
}

void write_benchmark_outputs(const BenchmarkReport& report, const std::string& dir) {
    detail::write_file(dir + "/report.csv", format_report_csv(report));
    detail::write_file(dir + "/best_k.csv", format_best_k_csv(report.rows));
    detail::write_file(dir + "/plot_data.csv", format_plot_data_csv(report.rows));
    detail::write_file(dir + "/timings.csv", format_timings_csv(report));
    detail::write_file(dir + "/summary.txt", format_summary_text(report));
    json meta;
    meta["config_hash"] = report.config_hash;
    meta["seed"] = report.seed;
    meta["model_files"] = report.model_files;
    meta["warnings"] = report.warnings;
    meta["rows"] = report.rows.size();
    detail::write_file(dir + "/metadata.json", meta.dump(1) + "\n");
}

}  // namespace specnhmc
