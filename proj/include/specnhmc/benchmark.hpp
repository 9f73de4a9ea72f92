#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "specnhmc/classify.hpp"
#include "specnhmc/dataset.hpp"
#include "specnhmc/mog.hpp"
#include "specnhmc/nhmc.hpp"
#include "specnhmc/wavelet.hpp"

namespace specnhmc {

// ---------------------------------------------------------------------------
// Feature extraction

/// Feature vectors of every spectrum in `lib`. `coeffs` is parallel to
/// lib.spectra. The GMM model is needed for gmm_* kinds and the MOG model for
/// mog_* kinds; label arrays are flattened scale-major.
FeatureSet extract_features(FeatureKind kind, const SpectralLibrary& lib, const std::vector<CoeffMatrix>& coeffs,
                            const NhmcModel* gmm = nullptr, const MogModel* mog = nullptr);

/// "nn-l1", "nn-l2", "nn-cosine" or "svm".
struct ClassifierSpec {
    enum class Type { nn, svm } type = Type::nn;
    NnMetric metric = NnMetric::l2;

    std::string classifier_name() const { return type == Type::nn ? "nn" : "svm"; }
    std::string metric_name() const { return type == Type::nn ? to_string(metric) : "rbf"; }
    std::string label() const { return type == Type::nn ? "nn-" + to_string(metric) : "svm"; }
};

ClassifierSpec classifier_from_string(const std::string& name);

struct ClassificationOutcome {
    std::vector<int> predictions;
    AccuracyReport accuracy;
    std::optional<SvmModel> svm;  // set for SVM classifiers
};

ClassificationOutcome classify_features(const FeatureSet& train, const FeatureSet& test, const ClassifierSpec& spec,
                                        const SvmOptions& svm_options = {});

// ---------------------------------------------------------------------------
// Configuration

struct BenchmarkConfig {
    std::uint64_t seed = 0;

    // data
    std::string source = "synthetic";  // "synthetic" or "csv"
    std::string path;                  // CSV library, relative to the workspace
    std::optional<std::vector<std::string>> classes;
    SyntheticOptions synthetic;

    PreprocessOptions preprocess;
    std::size_t balance_target = 65;  // 0 disables balancing

    std::size_t train_per_class = 52;
    std::size_t test_per_class = 13;
    bool test_from_train = false;  // classify the training set itself

    std::vector<double> dmp_values{0.70, 0.75, 0.80, 0.85, 0.90, 0.95, 1.00};
    std::vector<std::size_t> k_values{2, 3, 4, 5, 6, 7, 8, 9, 10};
    std::vector<FeatureKind> features{FeatureKind::spectrum, FeatureKind::gmm_labels, FeatureKind::gmm_sign,
                                      FeatureKind::mog_labels, FeatureKind::mog_sign};
    std::vector<ClassifierSpec> classifiers{{ClassifierSpec::Type::nn, NnMetric::l1},
                                            {ClassifierSpec::Type::nn, NnMetric::l2},
                                            {ClassifierSpec::Type::nn, NnMetric::cosine},
                                            {ClassifierSpec::Type::svm, NnMetric::l2}};

    std::size_t levels = 9;
    Wavelet wavelet = Wavelet::haar;
    std::size_t max_iter = 200;
    double tol = 1e-6;

    std::size_t svm_folds = 5;
    SvmGrid svm_grid = SvmGrid::standard();

    std::string output_dir = "results";
    bool save_models = true;
    bool save_svm_models = false;
};

/// Parses the JSON config. Unknown keys, wrong types and out-of-range values
/// throw ConfigError naming the offending key (dotted path).
BenchmarkConfig parse_benchmark_config(const std::string& json_text);
BenchmarkConfig load_benchmark_config(const std::string& path);
/// Canonical JSON of a config with every default filled in.
std::string benchmark_config_to_json(const BenchmarkConfig& config);

// ---------------------------------------------------------------------------
// Sweep

struct ReportRow {
    FeatureKind feature = FeatureKind::spectrum;
    std::string classifier;  // nn | svm
    std::string metric;      // l1 | l2 | cosine | rbf
    double dmp = 1.0;
    std::size_t k = 0;
    std::optional<double> accuracy;
    std::string status = "ok";  // "ok" or "error: <message>"
    double runtime_s = 0.0;
};

struct BenchmarkReport {
    std::vector<ReportRow> rows;  // sorted by (feature, classifier, metric, dmp, k)
    std::string config_hash;      // FNV-1a 64 of the canonical config JSON
    std::uint64_t seed = 0;
    std::vector<std::string> model_files;  // relative to the output directory
    std::vector<std::string> warnings;
    double total_runtime_s = 0.0;
};

/// Runs the full sweep. Relative paths in the config resolve against
/// `workspace`; artifacts go to workspace/output_dir. A failing
/// configuration is recorded in its rows and the rest continue.
BenchmarkReport run_benchmark(const BenchmarkConfig& config, const std::string& workspace, std::size_t workers);

/// The in-memory library the sweep starts from (loaded or synthesized,
/// balanced, preprocessed).
SpectralLibrary prepare_library(const BenchmarkConfig& config, const std::string& workspace);

/// feature_kind,classifier,metric,dmp,k,accuracy,status. Deterministic:
/// excludes runtimes.
std::string format_report_csv(const BenchmarkReport& report);
std::vector<ReportRow> parse_report_csv(const std::string& text);
/// Best accuracy over k per (feature, classifier, metric, dmp); ties take the
/// smaller k. Only rows with an accuracy take part.
std::string format_best_k_csv(const std::vector<ReportRow>& rows);
/// (dmp, accuracy) series per feature_kind / classifier / metric, best over k.
std::string format_plot_data_csv(const std::vector<ReportRow>& rows);
std::string format_timings_csv(const BenchmarkReport& report);
std::string format_summary_text(const BenchmarkReport& report);

/// Writes report.csv, best_k.csv, plot_data.csv, timings.csv, summary.txt and
/// metadata.json into `dir`.
void write_benchmark_outputs(const BenchmarkReport& report, const std::string& dir);

}  // namespace specnhmc
