#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "specnhmc/matrix.hpp"

namespace specnhmc {

enum class FeatureKind { spectrum, coeffs, gmm_labels, gmm_sign, mog_labels, mog_sign, rivard };

std::string to_string(FeatureKind k);
FeatureKind feature_kind_from_string(const std::string& name);
/// True for the label-array features that need a trained chain model.
bool is_nhmc_feature(FeatureKind k);

struct FeatureSet {
    std::vector<std::vector<double>> vectors;
    std::vector<int> class_ids;
    FeatureKind kind = FeatureKind::spectrum;

    std::size_t size() const { return vectors.size(); }
    std::size_t dimension() const { return vectors.empty() ? 0 : vectors.front().size(); }
    void validate() const;
};

enum class NnMetric { l1, l2, cosine };

std::string to_string(NnMetric m);
NnMetric nn_metric_from_string(const std::string& name);

/// Class of the nearest training vector (largest cosine similarity for
/// `cosine`); the lowest training index wins ties.
int nn_classify(const FeatureSet& train, std::span<const double> query, NnMetric metric);

// ---------------------------------------------------------------------------
// RBF support vector machine, one-vs-one, trained with SMO.

struct SvmGrid {
    std::vector<double> c_values;
    std::vector<double> gamma_values;

    /// C in 2^-5, 2^-3, ..., 2^15 and gamma in 2^-15, 2^-13, ..., 2^3.
    static SvmGrid standard();
};

struct SvmOptions {
    SvmGrid grid = SvmGrid::standard();
    std::size_t folds = 5;
    std::uint64_t seed = 0;
    double tolerance = 1e-3;
    std::size_t max_iterations = 100000;
};

/// Binary machine between classes positive (+1) and negative (-1):
/// f(x) = sum_i coef_i K(sv_i, x) - rho, f >= 0 votes for `positive`.
struct BinarySvm {
    int positive = 0;
    int negative = 0;
    std::vector<std::vector<double>> support_vectors;  // already scaled
    std::vector<double> coefficients;                   // y_i * alpha_i
    double rho = 0.0;
    /// Largest KKT violation over the training points (post-training check).
    double kkt_violation = 0.0;
};

struct SvmModel {
    double c = 1.0;
    double gamma = 1.0;
    double cv_accuracy = 0.0;
    std::vector<double> scale_min;  // per-dimension min/max mapped onto [-1, 1]
    std::vector<double> scale_max;
    std::vector<int> classes;  // ascending
    std::vector<BinarySvm> machines;
    std::vector<std::string> warnings;
};

/// Scales x with the model's per-dimension [-1, 1] map.
std::vector<double> svm_scale(const SvmModel& model, std::span<const double> x);

/// Trains one binary C-SVC with the given kernel matrix (SMO with
/// second-order working set selection). `labels` are +1 / -1.
BinarySvm train_binary_svm(const RealMatrix& kernel, const std::vector<int>& labels, double c, double tolerance,
                           std::size_t max_iterations);

/// Trains with fixed (C, gamma), no cross-validation.
SvmModel svm_fit(const FeatureSet& train, double c, double gamma, const SvmOptions& options = {});

/// Grid search by stratified k-fold cross-validated accuracy, then refit on
/// all data. Ties prefer the smaller C, then the smaller gamma.
SvmModel svm_train(const FeatureSet& train, const SvmOptions& options = {});

double svm_decision(const BinarySvm& machine, double gamma, std::span<const double> scaled);
int svm_predict(const SvmModel& model, std::span<const double> query);

std::string svm_model_to_json(const SvmModel& model);
SvmModel svm_model_from_json(const std::string& text);

// ---------------------------------------------------------------------------

struct AccuracyReport {
    double overall = 0.0;
    std::vector<int> classes;                     // ascending union of truth and predictions
    std::map<int, double> per_class;              // recall per true class
    Matrix<std::size_t> confusion;                // rows = truth, cols = prediction, in `classes` order
    std::size_t correct = 0;
    std::size_t total = 0;
};

AccuracyReport evaluate_accuracy(const std::vector<int>& predictions, const std::vector<int>& truth);

}  // namespace specnhmc
