#include <cmath>
#include <random>

#include "doctest.h"
#include "specnhmc/classify.hpp"
#include "specnhmc/error.hpp"

using namespace specnhmc;

namespace {

FeatureSet make_set(std::vector<std::vector<double>> v, std::vector<int> ids) {
    FeatureSet f;
    f.vectors = std::move(v);
    f.class_ids = std::move(ids);
    return f;
}

FeatureSet blobs(std::size_t classes, std::size_t per_class, std::size_t dim, double spread, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    FeatureSet f;
    for (std::size_t c = 0; c < classes; ++c) {
        std::vector<double> centre(dim);
        for (auto& x : centre) x = 3.0 * nd(rng);
        for (std::size_t j = 0; j < per_class; ++j) {
            std::vector<double> v(dim);
            for (std::size_t d = 0; d < dim; ++d) v[d] = centre[d] + spread * nd(rng);
            f.vectors.push_back(v);
            f.class_ids.push_back(static_cast<int>(c));
        }
    }
    return f;
}

RealMatrix rbf_kernel(const std::vector<std::vector<double>>& x, double gamma) {
    RealMatrix k(x.size(), x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t j = 0; j < x.size(); ++j) {
            double d = 0.0;
            for (std::size_t t = 0; t < x[i].size(); ++t) d += (x[i][t] - x[j][t]) * (x[i][t] - x[j][t]);
            k(i, j) = std::exp(-gamma * d);
        }
    return k;
}

/// True when the symmetric matrix admits a Cholesky factorization.
bool positive_definite(RealMatrix a) {
    const std::size_t n = a.rows();
    for (std::size_t j = 0; j < n; ++j) {
        double d = a(j, j);
        for (std::size_t k = 0; k < j; ++k) d -= a(j, k) * a(j, k);
        if (!(d > 0.0)) return false;
        d = std::sqrt(d);
        a(j, j) = d;
        for (std::size_t i = j + 1; i < n; ++i) {
            double v = a(i, j);
            for (std::size_t k = 0; k < j; ++k) v -= a(i, k) * a(j, k);
            a(i, j) = v / d;
        }
    }
    return true;
}

}  // namespace

TEST_CASE("nearest neighbour examples") {
    const auto train = make_set({{0, 0}, {10, 10}}, {0, 1});
    CHECK(nn_classify(train, std::vector<double>{1, 1}, NnMetric::l2) == 0);
    CHECK(nn_classify(train, std::vector<double>{1, 1}, NnMetric::l1) == 0);
    CHECK(nn_classify(train, std::vector<double>{10, 10}, NnMetric::l2) == 1);
    CHECK(nn_classify(train, std::vector<double>{5, 5}, NnMetric::l2) == 0);  // tie -> lowest index

    const auto dup = make_set({{1, 2}, {2, 4}, {3, 1}}, {4, 2, 1});
    CHECK(nn_classify(dup, std::vector<double>{0.5, 1}, NnMetric::cosine) == 4);
    CHECK_THROWS_AS(nn_classify(dup, std::vector<double>{0, 0}, NnMetric::cosine), DomainError);
    CHECK_THROWS(nn_classify(dup, std::vector<double>{0, 0, 1}, NnMetric::l2));
}

TEST_CASE("cosine ranking ignores positive query scaling") {
    const auto train = blobs(4, 10, 6, 1.0, 1);
    std::mt19937_64 rng(2);
    std::normal_distribution<double> nd(0.0, 2.0);
    std::uniform_real_distribution<double> s(0.01, 100.0);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> q(6);
        for (auto& x : q) x = nd(rng);
        std::vector<double> scaled(q);
        const double a = s(rng);
        for (auto& x : scaled) x *= a;
        CHECK(nn_classify(train, q, NnMetric::cosine) == nn_classify(train, scaled, NnMetric::cosine));
    }
}

TEST_CASE("queries drawn from the training set classify perfectly") {
    const auto train = blobs(3, 15, 5, 2.0, 3);
    for (auto m : {NnMetric::l1, NnMetric::l2, NnMetric::cosine}) {
        std::vector<int> pred;
        for (const auto& v : train.vectors) pred.push_back(nn_classify(train, v, m));
        CHECK(evaluate_accuracy(pred, train.class_ids).overall == 1.0);
    }
}

TEST_CASE("accuracy arithmetic and confusion matrix") {
    std::vector<int> truth(338), pred(338);
    for (std::size_t i = 0; i < 338; ++i) {
        truth[i] = static_cast<int>(i % 26);
        pred[i] = i < 169 ? truth[i] : (truth[i] + 1) % 26;
    }
    const auto r = evaluate_accuracy(pred, truth);
    CHECK(r.overall == 0.5);
    CHECK(r.correct == 169);
    std::size_t total = 0, trace = 0;
    for (std::size_t i = 0; i < r.classes.size(); ++i) {
        std::size_t row = 0;
        for (std::size_t j = 0; j < r.classes.size(); ++j) {
            total += r.confusion(i, j);
            row += r.confusion(i, j);
        }
        trace += r.confusion(i, i);
        CHECK(row == 13);
    }
    CHECK(total == 338);
    CHECK(static_cast<double>(trace) / static_cast<double>(total) == r.overall);
    CHECK(evaluate_accuracy(truth, truth).overall == 1.0);
    std::vector<int> wrong(truth);
    for (auto& w : wrong) w = (w + 1) % 26;
    CHECK(evaluate_accuracy(wrong, truth).overall == 0.0);
    CHECK_THROWS(evaluate_accuracy({1, 2}, {1}));
}

TEST_CASE("separable points are fit exactly") {
    const auto two = make_set({{0.0, 0.0}, {1.0, 1.0}}, {3, 5});
    const auto m = svm_fit(two, 1024.0, 0.5);
    CHECK(svm_predict(m, two.vectors[0]) == 3);
    CHECK(svm_predict(m, two.vectors[1]) == 5);
}

TEST_CASE("XOR is fit by an RBF machine") {
    const auto xor_set = make_set({{0, 0}, {1, 1}, {0, 1}, {1, 0}}, {0, 0, 1, 1});
    // Distinct points give a positive definite RBF kernel, so some hard-margin
    // solution separates them at every gamma on the grid.
    for (double g : SvmGrid::standard().gamma_values) CHECK(positive_definite(rbf_kernel(xor_set.vectors, g)));
    const auto m = svm_fit(xor_set, 1e4, 2.0);
    for (std::size_t i = 0; i < 4; ++i) CHECK(svm_predict(m, xor_set.vectors[i]) == xor_set.class_ids[i]);

    SvmOptions o;
    o.folds = 2;
    const auto tuned = svm_train(xor_set, o);
    const auto grid = SvmGrid::standard();
    CHECK(std::find(grid.c_values.begin(), grid.c_values.end(), tuned.c) != grid.c_values.end());
    CHECK(std::find(grid.gamma_values.begin(), grid.gamma_values.end(), tuned.gamma) != grid.gamma_values.end());
}

TEST_CASE("SMO solutions satisfy KKT conditions") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 30 + trial;
        std::vector<std::vector<double>> x(n, std::vector<double>(3));
        std::vector<int> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (auto& v : x[i]) v = nd(rng);
            y[i] = x[i][0] + 0.5 * x[i][1] + 0.3 * nd(rng) > 0 ? 1 : -1;
        }
        const double c = trial % 2 ? 1.0 : 10.0;
        const auto k = rbf_kernel(x, 0.5);
        const auto m = train_binary_svm(k, y, c, 1e-3, 100000);
        CHECK(m.kkt_violation <= 1e-3);
        // Independent check from the returned dual coefficients.
        std::vector<double> alpha(n, 0.0);
        for (std::size_t s = 0; s < m.coefficients.size(); ++s) {
            const auto idx = static_cast<std::size_t>(m.support_vectors[s][0]);
            alpha[idx] = m.coefficients[s] * y[idx];
        }
        double eq = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            eq += alpha[i] * y[i];
            CHECK(alpha[i] >= -1e-12);
            CHECK(alpha[i] <= c + 1e-12);
            double f = -m.rho;
            for (std::size_t j = 0; j < n; ++j) f += alpha[j] * y[j] * k(j, i);
            const double margin = y[i] * f;
            if (alpha[i] <= 1e-12) CHECK(margin >= 1.0 - 1e-3);
            else if (alpha[i] >= c - 1e-12) CHECK(margin <= 1.0 + 1e-3);
            else CHECK(std::abs(margin - 1.0) <= 1e-3);
        }
        CHECK(std::abs(eq) <= 1e-10);
    }
}

TEST_CASE("equidistant query goes to the lower class") {
    const auto sym = make_set({{-1.0}, {1.0}}, {0, 1});
    for (double c : {1.0, 100.0}) {
        const auto m = svm_fit(sym, c, 0.5);
        CHECK(svm_predict(m, std::vector<double>{0.0}) == 0);
        CHECK(svm_predict(m, std::vector<double>{-1.0}) == 0);
        CHECK(svm_predict(m, std::vector<double>{1.0}) == 1);
    }
    const auto rev = make_set({{1.0}, {-1.0}}, {0, 1});
    CHECK(svm_predict(svm_fit(rev, 10.0, 0.5), std::vector<double>{0.0}) == 0);
}

TEST_CASE("grid search is deterministic and generalizes on blobs") {
    const auto train = blobs(3, 20, 4, 0.8, 5);
    SvmOptions o;
    o.grid.c_values = {0.5, 8.0};
    o.grid.gamma_values = {0.01, 0.1, 1.0};
    o.seed = 9;
    const auto a = svm_train(train, o);
    const auto b = svm_train(train, o);
    CHECK(svm_model_to_json(a) == svm_model_to_json(b));
    CHECK(a.cv_accuracy >= 0.9);
    std::vector<int> pred;
    for (const auto& v : train.vectors) pred.push_back(svm_predict(a, v));
    CHECK(evaluate_accuracy(pred, train.class_ids).overall >= 0.95);
    CHECK(a.machines.size() == 3);
    for (const auto& m : a.machines) CHECK(m.kkt_violation <= 1e-3);

    const auto back = svm_model_from_json(svm_model_to_json(a));
    CHECK(svm_model_to_json(back) == svm_model_to_json(a));
    for (const auto& v : train.vectors) CHECK(svm_predict(back, v) == svm_predict(a, v));
}

TEST_CASE("SVM scaling maps training range onto [-1, 1]") {
    const auto train = make_set({{0, 5, 2}, {10, 5, 4}, {5, 5, 3}}, {0, 1, 1});
    const auto m = svm_fit(train, 1.0, 1.0);
    const auto s0 = svm_scale(m, train.vectors[0]);
    const auto s1 = svm_scale(m, train.vectors[1]);
    CHECK(s0[0] == -1.0);
    CHECK(s1[0] == 1.0);
    CHECK(s0[1] == 0.0);
    CHECK(svm_scale(m, train.vectors[2])[2] == 0.0);
}

TEST_CASE("feature kind names") {
    for (auto k : {FeatureKind::spectrum, FeatureKind::coeffs, FeatureKind::gmm_labels, FeatureKind::gmm_sign,
                   FeatureKind::mog_labels, FeatureKind::mog_sign, FeatureKind::rivard})
        CHECK(feature_kind_from_string(to_string(k)) == k);
    CHECK(is_nhmc_feature(FeatureKind::mog_sign));
    CHECK_FALSE(is_nhmc_feature(FeatureKind::rivard));
    CHECK_THROWS(feature_kind_from_string("mog+sign"));
    const auto bad = make_set({{1, 2}, {1}}, {0, 0});
    CHECK_THROWS_AS(bad.validate(), DimensionError);
}
