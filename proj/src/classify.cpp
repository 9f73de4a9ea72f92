#include "specnhmc/classify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "json.hpp"
#include "specnhmc/error.hpp"

namespace specnhmc {

namespace {

constexpr const char* kFeatureNames[] = {"spectrum", "coeffs", "gmm_labels", "gmm_sign", "mog_labels", "mog_sign", "rivard"};

}  // namespace

std::string to_string(FeatureKind k) { return kFeatureNames[static_cast<int>(k)]; }

FeatureKind feature_kind_from_string(const std::string& name) {
    for (int i = 0; i < 7; ++i)
        if (name == kFeatureNames[i]) return static_cast<FeatureKind>(i);
    throw ValidationError("unknown feature kind '" + name + "'");
}

bool is_nhmc_feature(FeatureKind k) {
    return k == FeatureKind::gmm_labels || k == FeatureKind::gmm_sign || k == FeatureKind::mog_labels ||
           k == FeatureKind::mog_sign;
}

void FeatureSet::validate() const {
    if (vectors.empty()) throw ValidationError("feature set is empty");
    if (vectors.size() != class_ids.size()) throw ValidationError("feature set has mismatched label count");
    for (const auto& v : vectors)
        if (v.size() != vectors.front().size()) throw DimensionError("feature vectors differ in dimension");
}

std::string to_string(NnMetric m) {
    switch (m) {
        case NnMetric::l1:
            return "l1";
        case NnMetric::l2:
            return "l2";
        case NnMetric::cosine:
            return "cosine";
    }
    return "l2";
}

NnMetric nn_metric_from_string(const std::string& name) {
    if (name == "l1") return NnMetric::l1;
    if (name == "l2") return NnMetric::l2;
    if (name == "cosine") return NnMetric::cosine;
    throw ValidationError("unknown NN metric '" + name + "'");
}

int nn_classify(const FeatureSet& train, std::span<const double> query, NnMetric metric) {
    train.validate();
    if (query.size() != train.dimension()) throw DimensionError("query dimension differs from the training set");
    double qnorm = 0.0;
    if (metric == NnMetric::cosine) {
        for (double v : query) qnorm += v * v;
        if (qnorm == 0.0) throw DomainError("cosine similarity of a zero query is undefined");
        qnorm = std::sqrt(qnorm);
    }
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t t = 0; t < train.size(); ++t) {
        const auto& x = train.vectors[t];
        double score = 0.0;
        switch (metric) {
            case NnMetric::l1:
                for (std::size_t i = 0; i < x.size(); ++i) score += std::abs(x[i] - query[i]);
                break;
            case NnMetric::l2:
                for (std::size_t i = 0; i < x.size(); ++i) score += (x[i] - query[i]) * (x[i] - query[i]);
                break;
            case NnMetric::cosine: {
                double dot = 0.0;
                double tn = 0.0;
                for (std::size_t i = 0; i < x.size(); ++i) {
                    dot += x[i] * query[i];
                    tn += x[i] * x[i];
                }
                // A zero training vector has similarity 0 with everything.
                score = tn == 0.0 ? 0.0 : -dot / (std::sqrt(tn) * qnorm);
                break;
            }
        }
        if (score < best) {
            best = score;
            arg = t;
        }
    }
    return train.class_ids[arg];
}

// ---------------------------------------------------------------------------
// SVM

SvmGrid SvmGrid::standard() {
    SvmGrid g;
    for (int e = -5; e <= 15; e += 2) g.c_values.push_back(std::ldexp(1.0, e));
    for (int e = -15; e <= 3; e += 2) g.gamma_values.push_back(std::ldexp(1.0, e));
    return g;
}

namespace {

constexpr double kTau = 1e-12;

double sq_distance(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
    return acc;
}

struct Scaling {
    std::vector<double> lo;
    std::vector<double> hi;
};

Scaling fit_scaling(const FeatureSet& set) {
    Scaling s;
    const std::size_t d = set.dimension();
    s.lo.assign(d, std::numeric_limits<double>::infinity());
    s.hi.assign(d, -std::numeric_limits<double>::infinity());
    for (const auto& v : set.vectors) {
        for (std::size_t i = 0; i < d; ++i) {
            s.lo[i] = std::min(s.lo[i], v[i]);
            s.hi[i] = std::max(s.hi[i], v[i]);
        }
    }
    return s;
}

std::vector<double> apply_scaling(const std::vector<double>& lo, const std::vector<double>& hi, std::span<const double> x) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = hi[i] > lo[i] ? -1.0 + 2.0 * (x[i] - lo[i]) / (hi[i] - lo[i]) : 0.0;
    }
    return out;
}

RealMatrix distance_matrix(const std::vector<std::vector<double>>& xs) {
    RealMatrix d(xs.size(), xs.size(), 0.0);
    for (std::size_t i = 0; i < xs.size(); ++i)
        for (std::size_t j = i + 1; j < xs.size(); ++j) d(i, j) = d(j, i) = sq_distance(xs[i], xs[j]);
    return d;
}

RealMatrix rbf_from_distances(const RealMatrix& d, double gamma) {
    RealMatrix k(d.rows(), d.cols());
    for (std::size_t i = 0; i < d.size(); ++i) k.data()[i] = std::exp(-gamma * d.data()[i]);
    return k;
}

RealMatrix submatrix(const RealMatrix& m, const std::vector<std::size_t>& idx) {
    RealMatrix out(idx.size(), idx.size());
    for (std::size_t a = 0; a < idx.size(); ++a)
        for (std::size_t b = 0; b < idx.size(); ++b) out(a, b) = m(idx[a], idx[b]);
    return out;
}

/// SMO result expressed over local indices, before support vectors are copied out.
struct DualSolution {
    std::vector<double> alpha;
    double rho = 0.0;
    double kkt_violation = 0.0;
    bool hit_iteration_cap = false;
};

DualSolution solve_dual(const RealMatrix& kernel, const std::vector<int>& y, double c, double eps, std::size_t max_iter) {
    const std::size_t n = y.size();
    std::vector<double> alpha(n, 0.0);
    std::vector<double> grad(n, -1.0);
    auto upper = [&](std::size_t t) { return (y[t] == 1 && alpha[t] < c) || (y[t] == -1 && alpha[t] > 0.0); };
    auto lower = [&](std::size_t t) { return (y[t] == 1 && alpha[t] > 0.0) || (y[t] == -1 && alpha[t] < c); };

    DualSolution sol;
    std::size_t iter = 0;
    for (; iter < max_iter; ++iter) {
        double gmax = -std::numeric_limits<double>::infinity();
        std::size_t i = n;
        for (std::size_t t = 0; t < n; ++t) {
            if (upper(t) && -y[t] * grad[t] > gmax) {
                gmax = -y[t] * grad[t];
                i = t;
            }
        }
        double gmin = std::numeric_limits<double>::infinity();
        double best_obj = std::numeric_limits<double>::infinity();
        std::size_t j = n;
        for (std::size_t t = 0; t < n; ++t) {
            if (!lower(t)) continue;
            const double v = -y[t] * grad[t];
            gmin = std::min(gmin, v);
            if (i == n) continue;
            const double b = gmax - v;
            if (b > 0.0) {
                double a = kernel(i, i) + kernel(t, t) - 2.0 * kernel(i, t);
                if (a <= 0.0) a = kTau;
                const double obj = -(b * b) / a;
                if (obj < best_obj) {
                    best_obj = obj;
                    j = t;
                }
            }
        }
        if (i == n || j == n || gmax - gmin < eps) break;

        const double qij = y[i] * y[j] * kernel(i, j);
        const double old_i = alpha[i];
        const double old_j = alpha[j];
        if (y[i] != y[j]) {
            double quad = kernel(i, i) + kernel(j, j) + 2.0 * qij;
            if (quad <= 0.0) quad = kTau;
            const double delta = (-grad[i] - grad[j]) / quad;
            const double diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if (diff > 0.0) {
                if (alpha[j] < 0.0) {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if (alpha[i] < 0.0) {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if (diff > 0.0) {
                if (alpha[i] > c) {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if (alpha[j] > c) {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            double quad = kernel(i, i) + kernel(j, j) - 2.0 * qij;
            if (quad <= 0.0) quad = kTau;
            const double delta = (grad[i] - grad[j]) / quad;
            const double sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if (sum > c) {
                if (alpha[i] > c) {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if (alpha[j] < 0.0) {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if (sum > c) {
                if (alpha[j] > c) {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if (alpha[i] < 0.0) {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        const double di = alpha[i] - old_i;
        const double dj = alpha[j] - old_j;
        for (std::size_t t = 0; t < n; ++t) {
            grad[t] += y[t] * (y[i] * kernel(t, i) * di + y[j] * kernel(t, j) * dj);
        }
    }
    sol.hit_iteration_cap = iter >= max_iter;

    // rho: mean of y*grad over free vectors, else the midpoint of the feasible interval.
    double ub = std::numeric_limits<double>::infinity();
    double lb = -std::numeric_limits<double>::infinity();
    double free_sum = 0.0;
    std::size_t free_count = 0;
    for (std::size_t t = 0; t < n; ++t) {
        const double yg = y[t] * grad[t];
        if (alpha[t] >= c) {
            if (y[t] == -1) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else if (alpha[t] <= 0.0) {
            if (y[t] == 1) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else {
            ++free_count;
            free_sum += yg;
        }
    }
    sol.rho = free_count > 0 ? free_sum / static_cast<double>(free_count) : 0.5 * (ub + lb);

    // KKT residual of y_t f(x_t) against the bound each alpha sits on.
    for (std::size_t t = 0; t < n; ++t) {
        double f = -sol.rho;
        for (std::size_t s = 0; s < n; ++s) f += y[s] * alpha[s] * kernel(s, t);
        const double margin = y[t] * f;
        double v = 0.0;
        if (alpha[t] <= 0.0) {
            v = std::max(0.0, 1.0 - margin);
        } else if (alpha[t] >= c) {
            v = std::max(0.0, margin - 1.0);
        } else {
            v = std::abs(margin - 1.0);
        }
        sol.kkt_violation = std::max(sol.kkt_violation, v);
    }
    sol.alpha = std::move(alpha);
    return sol;
}

struct PairwiseTrainer {
    const RealMatrix& kernel;                     // over all training points
    const std::vector<std::vector<double>>& xs;   // scaled training points
    const std::vector<int>& labels;
    double c;
    const SvmOptions& options;

    std::vector<BinarySvm> train(const std::vector<std::size_t>& subset, const std::vector<int>& classes,
                                 std::vector<std::string>* warnings, bool keep_vectors) const {
        std::vector<BinarySvm> machines;
        for (std::size_t a = 0; a < classes.size(); ++a) {
            for (std::size_t b = a + 1; b < classes.size(); ++b) {
                std::vector<std::size_t> idx;
                std::vector<int> y;
                for (std::size_t t : subset) {
                    if (labels[t] == classes[a]) {
                        idx.push_back(t);
                        y.push_back(1);
                    } else if (labels[t] == classes[b]) {
                        idx.push_back(t);
                        y.push_back(-1);
                    }
                }
                const auto sol = solve_dual(submatrix(kernel, idx), y, c, options.tolerance, options.max_iterations);
                if (sol.hit_iteration_cap && warnings) {
                    warnings->push_back("SMO iteration cap reached for classes " + std::to_string(classes[a]) + "/" +
                                        std::to_string(classes[b]));
                }
                BinarySvm m;
                m.positive = classes[a];
                m.negative = classes[b];
                m.rho = sol.rho;
                m.kkt_violation = sol.kkt_violation;
                for (std::size_t t = 0; t < idx.size(); ++t) {
                    if (sol.alpha[t] > 0.0) {
                        m.coefficients.push_back(y[t] * sol.alpha[t]);
                        // Indices are kept in the vector slot until copied out below.
                        m.support_vectors.push_back(keep_vectors ? xs[idx[t]] : std::vector<double>{static_cast<double>(idx[t])});
                    }
                }
                machines.push_back(std::move(m));
            }
        }
        return machines;
    }
};

int vote(const std::vector<BinarySvm>& machines, const std::vector<int>& classes,
         const std::function<double(const BinarySvm&)>& decision) {
    std::map<int, int> votes;
    for (int c : classes) votes[c] = 0;
    for (const auto& m : machines) ++votes[decision(m) >= 0.0 ? m.positive : m.negative];
    int best = classes.front();
    int best_votes = -1;
    for (int c : classes) {
        if (votes[c] > best_votes) {
            best_votes = votes[c];
            best = c;
        }
    }
    return best;
}

std::vector<int> sorted_classes(const std::vector<int>& ids) {
    std::set<int> s(ids.begin(), ids.end());
    return {s.begin(), s.end()};
}

}  // namespace

std::vector<double> svm_scale(const SvmModel& model, std::span<const double> x) {
    if (x.size() != model.scale_min.size()) throw DimensionError("query dimension differs from the SVM model");
    return apply_scaling(model.scale_min, model.scale_max, x);
}

BinarySvm train_binary_svm(const RealMatrix& kernel, const std::vector<int>& labels, double c, double tolerance,
                           std::size_t max_iterations) {
    const auto sol = solve_dual(kernel, labels, c, tolerance, max_iterations);
    BinarySvm m;
    m.positive = 1;
    m.negative = -1;
    m.rho = sol.rho;
    m.kkt_violation = sol.kkt_violation;
    for (std::size_t t = 0; t < labels.size(); ++t) {
        if (sol.alpha[t] > 0.0) {
            m.coefficients.push_back(labels[t] * sol.alpha[t]);
            m.support_vectors.push_back({static_cast<double>(t)});
        }
    }
    return m;
}

SvmModel svm_fit(const FeatureSet& train, double c, double gamma, const SvmOptions& options) {
    train.validate();
    const auto classes = sorted_classes(train.class_ids);
    if (classes.size() < 2) throw DomainError("SVM training needs at least two classes");
    SvmModel model;
    model.c = c;
    model.gamma = gamma;
    model.classes = classes;
    const auto scaling = fit_scaling(train);
    model.scale_min = scaling.lo;
    model.scale_max = scaling.hi;
    std::vector<std::vector<double>> xs;
    xs.reserve(train.size());
    for (const auto& v : train.vectors) xs.push_back(apply_scaling(scaling.lo, scaling.hi, v));
    const auto kernel = rbf_from_distances(distance_matrix(xs), gamma);
    std::vector<std::size_t> all(train.size());
    std::iota(all.begin(), all.end(), 0);
    PairwiseTrainer trainer{kernel, xs, train.class_ids, c, options};
    model.machines = trainer.train(all, classes, &model.warnings, true);
    return model;
}

SvmModel svm_train(const FeatureSet& train, const SvmOptions& options) {
    train.validate();
    const auto classes = sorted_classes(train.class_ids);
    if (classes.size() < 2) throw DomainError("SVM training needs at least two classes");
    if (options.folds < 2) throw DomainError("cross-validation needs at least two folds");
    for (int c : classes) {
        const auto n = static_cast<std::size_t>(std::count(train.class_ids.begin(), train.class_ids.end(), c));
        if (n < options.folds) {
            throw DomainError("class " + std::to_string(c) + " has " + std::to_string(n) + " training vectors, fewer than " +
                              std::to_string(options.folds) + " cross-validation folds");
        }
    }
    auto c_values = options.grid.c_values;
    auto gamma_values = options.grid.gamma_values;
    if (c_values.empty() || gamma_values.empty()) throw DomainError("SVM grid is empty");
    std::sort(c_values.begin(), c_values.end());
    std::sort(gamma_values.begin(), gamma_values.end());

    const auto scaling = fit_scaling(train);
    std::vector<std::vector<double>> xs;
    for (const auto& v : train.vectors) xs.push_back(apply_scaling(scaling.lo, scaling.hi, v));
    const auto dist = distance_matrix(xs);

    // Stratified folds: each class shuffled, then dealt round-robin.
    std::mt19937_64 rng(options.seed);
    std::vector<std::size_t> fold_of(train.size());
    for (int c : classes) {
        std::vector<std::size_t> members;
        for (std::size_t t = 0; t < train.size(); ++t)
            if (train.class_ids[t] == c) members.push_back(t);
        std::shuffle(members.begin(), members.end(), rng);
        for (std::size_t r = 0; r < members.size(); ++r) fold_of[members[r]] = r % options.folds;
    }

    std::vector<std::string> warnings;
    std::vector<bool> fold_ok(options.folds, true);
    for (std::size_t f = 0; f < options.folds; ++f) {
        std::set<int> train_classes;
        bool has_validation = false;
        for (std::size_t t = 0; t < train.size(); ++t) {
            if (fold_of[t] == f) {
                has_validation = true;
            } else {
                train_classes.insert(train.class_ids[t]);
            }
        }
        if (train_classes.size() < 2 || !has_validation) {
            fold_ok[f] = false;
            warnings.push_back("cross-validation fold " + std::to_string(f) + " is degenerate and was skipped");
        }
    }

    double best_acc = -1.0;
    double best_c = c_values.front();
    double best_gamma = gamma_values.front();
    std::vector<RealMatrix> kernels;
    kernels.reserve(gamma_values.size());
    for (double g : gamma_values) kernels.push_back(rbf_from_distances(dist, g));

    for (double c : c_values) {
        for (std::size_t gi = 0; gi < gamma_values.size(); ++gi) {
            const auto& kernel = kernels[gi];
            std::size_t correct = 0;
            std::size_t total = 0;
            for (std::size_t f = 0; f < options.folds; ++f) {
                if (!fold_ok[f]) continue;
                std::vector<std::size_t> fit_idx;
                for (std::size_t t = 0; t < train.size(); ++t)
                    if (fold_of[t] != f) fit_idx.push_back(t);
                const auto fold_classes = sorted_classes([&] {
                    std::vector<int> ids;
                    for (std::size_t t : fit_idx) ids.push_back(train.class_ids[t]);
                    return ids;
                }());
                PairwiseTrainer trainer{kernel, xs, train.class_ids, c, options};
                const auto machines = trainer.train(fit_idx, fold_classes, nullptr, false);
                for (std::size_t t = 0; t < train.size(); ++t) {
                    if (fold_of[t] != f) continue;
                    const int pred = vote(machines, fold_classes, [&](const BinarySvm& m) {
                        double v = -m.rho;
                        for (std::size_t s = 0; s < m.coefficients.size(); ++s) {
                            v += m.coefficients[s] * kernel(static_cast<std::size_t>(m.support_vectors[s][0]), t);
                        }
                        return v;
                    });
                    correct += pred == train.class_ids[t] ? 1 : 0;
                    ++total;
                }
            }
            const double acc = total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
            if (acc > best_acc) {
                best_acc = acc;
                best_c = c;
                best_gamma = gamma_values[gi];
            }
        }
    }

    SvmModel model = svm_fit(train, best_c, best_gamma, options);
    model.cv_accuracy = best_acc;
    model.warnings.insert(model.warnings.begin(), warnings.begin(), warnings.end());
    return model;
}

double svm_decision(const BinarySvm& machine, double gamma, std::span<const double> scaled) {
    double v = -machine.rho;
    for (std::size_t s = 0; s < machine.coefficients.size(); ++s) {
        v += machine.coefficients[s] * std::exp(-gamma * sq_distance(machine.support_vectors[s], scaled));
    }
    return v;
}

int svm_predict(const SvmModel& model, std::span<const double> query) {
    const auto x = svm_scale(model, query);
    return vote(model.machines, model.classes, [&](const BinarySvm& m) { return svm_decision(m, model.gamma, x); });
}

std::string svm_model_to_json(const SvmModel& model) {
    nlohmann::json j;
    j["format"] = "specnhmc-svm";
    j["version"] = 1;
    j["kernel"] = "rbf";
    j["C"] = model.c;
    j["gamma"] = model.gamma;
    j["cv_accuracy"] = model.cv_accuracy;
    j["scaling"] = {{"target", {-1.0, 1.0}}, {"min", model.scale_min}, {"max", model.scale_max}};
    j["classes"] = model.classes;
    j["warnings"] = model.warnings;
    nlohmann::json machines = nlohmann::json::array();
    for (const auto& m : model.machines) {
        machines.push_back({{"positive", m.positive},
                            {"negative", m.negative},
                            {"rho", m.rho},
                            {"kkt_violation", m.kkt_violation},
                            {"coefficients", m.coefficients},
                            {"support_vectors", m.support_vectors}});
    }
    j["machines"] = std::move(machines);
    return j.dump(1) + "\n";
}

SvmModel svm_model_from_json(const std::string& text) {
    try {
        const auto j = nlohmann::json::parse(text);
        if (j.value("format", std::string{}) != "specnhmc-svm") throw ParseError("not an SVM model file");
        SvmModel m;
        m.c = j.at("C").get<double>();
        m.gamma = j.at("gamma").get<double>();
        m.cv_accuracy = j.at("cv_accuracy").get<double>();
        m.scale_min = j.at("scaling").at("min").get<std::vector<double>>();
        m.scale_max = j.at("scaling").at("max").get<std::vector<double>>();
        m.classes = j.at("classes").get<std::vector<int>>();
        m.warnings = j.at("warnings").get<std::vector<std::string>>();
        for (const auto& mj : j.at("machines")) {
            BinarySvm b;
            b.positive = mj.at("positive").get<int>();
            b.negative = mj.at("negative").get<int>();
            b.rho = mj.at("rho").get<double>();
            b.kkt_violation = mj.at("kkt_violation").get<double>();
            b.coefficients = mj.at("coefficients").get<std::vector<double>>();
            b.support_vectors = mj.at("support_vectors").get<std::vector<std::vector<double>>>();
            m.machines.push_back(std::move(b));
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("SVM model file: ") + e.what());
    }
}

// ---------------------------------------------------------------------------

AccuracyReport evaluate_accuracy(const std::vector<int>& predictions, const std::vector<int>& truth) {
    if (predictions.size() != truth.size()) throw DimensionError("predictions and truth differ in length");
    AccuracyReport r;
    std::set<int> cls(truth.begin(), truth.end());
    cls.insert(predictions.begin(), predictions.end());
    r.classes.assign(cls.begin(), cls.end());
    std::map<int, std::size_t> pos;
    for (std::size_t i = 0; i < r.classes.size(); ++i) pos[r.classes[i]] = i;
    r.confusion = Matrix<std::size_t>(r.classes.size(), r.classes.size(), 0);
    r.total = truth.size();
    for (std::size_t i = 0; i < truth.size(); ++i) {
        ++r.confusion(pos[truth[i]], pos[predictions[i]]);
        if (truth[i] == predictions[i]) ++r.correct;
    }
    r.overall = r.total ? static_cast<double>(r.correct) / static_cast<double>(r.total) : 0.0;
    for (int c : std::set<int>(truth.begin(), truth.end())) {
        std::size_t row_total = 0;
        for (std::size_t j = 0; j < r.classes.size(); ++j) row_total += r.confusion(pos[c], j);
        r.per_class[c] = static_cast<double>(r.confusion(pos[c], pos[c])) / static_cast<double>(row_total);
    }
    return r;
}

}  // namespace specnhmc
