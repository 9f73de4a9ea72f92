#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "specnhmc/error.hpp"
#include "specnhmc/labeling.hpp"

using namespace specnhmc;

namespace {

NhmcModel model_from_chain(const ChainParams& p, std::size_t bands) {
    NhmcModel m;
    m.levels = p.levels;
    m.k = p.k;
    m.per_wavelength.assign(bands, p);
    for (std::size_t b = 0; b < bands; ++b) m.grid.push_back(0.4 + 0.005 * static_cast<double>(b));
    m.iterations.assign(bands, 0);
    return m;
}

Spectrum on_grid(const std::vector<double>& grid, auto&& f) {
    Spectrum s;
    s.sample_id = "s";
    s.wavelengths = grid;
    for (std::size_t b = 0; b < grid.size(); ++b) s.reflectance.push_back(f(b));
    return s;
}

}  // namespace

TEST_CASE("single-node Viterbi picks the MAP state") {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 200; ++trial) {
        const auto p = oracle::random_chain(4, 1, rng);
        const std::vector<double> w{oracle::random_chain_values(1, rng)[0]};
        int best = 0;
        double best_cost = 1e300;
        for (int i = 0; i < 4; ++i) {
            const double v = p.variances(0, i);
            const double cost = w[0] * w[0] / (2 * v) + 0.5 * std::log(v) - std::log(p.initial_probs[i]);
            if (cost < best_cost) best_cost = cost, best = i;
        }
        CHECK(viterbi_gmm(w, p).states[0] == best);
    }
}

TEST_CASE("GMM Viterbi matches path enumeration") {
    std::mt19937_64 rng(2);
    int same_path = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t k = 2 + trial % 3;
        const std::size_t L = 1 + trial % 8;
        const auto p = oracle::random_chain(k, L, rng);
        const auto w = oracle::random_chain_values(L, rng);
        const auto v = viterbi_gmm(w, p);
        const auto e = oracle::enumerate_gmm(p, w);
        CHECK(std::abs(v.log_joint - std::log(e.best_joint)) <= 1e-10 * std::max(1.0, std::abs(std::log(e.best_joint))));
        CHECK(std::abs(std::log(oracle::gmm_joint(p, w, v.states)) - std::log(e.best_joint)) <= 1e-10 * std::max(1.0, std::abs(std::log(e.best_joint))));
        same_path += v.states == e.best_path;
    }
    CHECK(same_path == 100);
}

TEST_CASE("forced ties resolve to state zero") {
    ChainParams p;
    p.k = 3;
    p.levels = 5;
    p.initial_probs.assign(3, 1.0 / 3);
    for (int t = 0; t < 4; ++t) p.transitions.emplace_back(3, 3, 1.0 / 3);
    p.variances = RealMatrix(5, 3, 0.7);
    const std::vector<double> w{0.3, -1.2, 0.0, 2.0, 0.5};
    CHECK(viterbi_gmm(w, p).states == std::vector<int>(5, 0));
}

TEST_CASE("adding a constant to one scale's log scores leaves the path unchanged") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const auto p = oracle::random_chain(3, 6, rng);
        const auto w = oracle::random_chain_values(6, rng);
        std::vector<double> li(3);
        std::vector<RealMatrix> lt;
        RealMatrix le(6, 3);
        for (int i = 0; i < 3; ++i) li[i] = std::log(p.initial_probs[i]);
        for (const auto& a : p.transitions) {
            RealMatrix m(3, 3);
            for (std::size_t i = 0; i < 9; ++i) m.data()[i] = std::log(a.data()[i]);
            lt.push_back(m);
        }
        for (std::size_t s = 0; s < 6; ++s)
            for (std::size_t i = 0; i < 3; ++i) le(s, i) = std::log(oracle::normal_pdf(w[s], p.variances(s, i)));
        const auto base = viterbi_log(li, lt, le);
        RealMatrix shifted = le;
        for (std::size_t i = 0; i < 3; ++i) shifted(trial % 6, i) += 17.25;
        CHECK(viterbi_log(li, lt, shifted).states == base.states);
        CHECK(viterbi_gmm(w, p).states == base.states);
    }
}

TEST_CASE("non-finite chains are rejected") {
    std::mt19937_64 rng(4);
    const auto p = oracle::random_chain(2, 3, rng);
    const std::vector<double> w{0.1, NAN, 0.2};
    CHECK_THROWS_AS(viterbi_gmm(w, p), ValidationError);
}

TEST_CASE("add_signs follows the coefficient sign") {
    LabelArray l;
    l.labels = LabelMatrix(2, 3);
    l.labels(0, 0) = 2;
    l.labels(0, 1) = 0;
    l.labels(0, 2) = 1;
    l.labels(1, 0) = 1;
    l.labels(1, 1) = 0;
    l.labels(1, 2) = 2;
    CoeffMatrix c;
    c.values = RealMatrix(2, 3);
    c.values(0, 0) = -0.3;
    c.values(0, 1) = -5.0;
    c.values(0, 2) = 0.0;
    c.values(1, 0) = 0.2;
    c.values(1, 1) = 4.0;
    c.values(1, 2) = -1e-300;
    const auto s = add_signs(l, c);
    CHECK(s.is_signed);
    CHECK(s.labels(0, 0) == -2);
    CHECK(s.labels(0, 1) == 0);
    CHECK(s.labels(0, 2) == 1);
    CHECK(s.labels(1, 0) == 1);
    CHECK(s.labels(1, 1) == 0);
    CHECK(s.labels(1, 2) == -2);

    c.values = RealMatrix(2, 3, 0.5);
    CHECK(add_signs(l, c).labels == l.labels);

    CoeffMatrix wrong;
    wrong.values = RealMatrix(3, 3, 1.0);
    CHECK_THROWS(add_signs(l, wrong));
    CHECK_THROWS(add_signs(s, c));
}

TEST_CASE("label_spectrum dimensions, determinism and grid checks") {
    std::mt19937_64 rng(5);
    auto p = order_states_by_variance(oracle::random_chain(3, 4, rng));
    const auto model = model_from_chain(p, 40);
    const auto s = on_grid(model.grid, [](std::size_t b) { return 0.5 + 0.3 * std::sin(0.4 * static_cast<double>(b)); });
    const auto a = label_spectrum(s, model);
    CHECK(a.levels() == 4);
    CHECK(a.bands() == 40);
    CHECK(a.log_likelihoods.size() == 40);
    CHECK_FALSE(a.is_signed);
    CHECK(label_spectrum(s, model) == a);
    const auto coeffs = uwt(s.reflectance, 4, Wavelet::haar);
    for (std::size_t n = 0; n < 40; ++n) {
        const auto v = viterbi_gmm(coeffs.chain(n), p);
        for (std::size_t r = 0; r < 4; ++r) CHECK(a.labels(r, n) == v.states[r]);
        CHECK(a.log_likelihoods[n] == doctest::Approx(chain_log_likelihood(coeffs.chain(n), p)).epsilon(1e-12));
    }
    const auto flat = a.flatten();
    REQUIRE(flat.size() == 160);
    CHECK(flat[41] == a.labels(1, 1));

    auto off = s;
    off.wavelengths[3] += 0.001;
    CHECK_THROWS_AS(label_spectrum(off, model), ValidationError);
}

TEST_CASE("a constant spectrum takes the state favoured at zero") {
    std::mt19937_64 rng(6);
    const auto p = order_states_by_variance(oracle::random_chain(3, 5, rng));
    const auto model = model_from_chain(p, 32);
    const auto a = label_spectrum(on_grid(model.grid, [](std::size_t) { return 0.4; }), model);
    const auto zero = viterbi_gmm(std::vector<double>(5, 0.0), p).states;
    for (std::size_t n = 0; n < 32; ++n)
        for (std::size_t r = 0; r < 5; ++r) CHECK(a.labels(r, n) == zero[r]);
}

TEST_CASE("a wide decreasing region gives nonnegative signed labels") {
    // Small state 0 with a clearly larger state 1 so slopes register as large.
    ChainParams p;
    p.k = 2;
    p.levels = 4;
    p.initial_probs = {0.5, 0.5};
    for (int t = 0; t < 3; ++t) {
        RealMatrix a(2, 2, 0.5);
        p.transitions.push_back(a);
    }
    p.variances = RealMatrix(4, 2);
    for (std::size_t s = 0; s < 4; ++s) {
        p.variances(s, 0) = 1e-8;
        p.variances(s, 1) = 1e-2;
    }
    const auto model = model_from_chain(p, 64);
    const auto s = on_grid(model.grid, [](std::size_t b) { return 1.0 - 0.01 * static_cast<double>(b); });
    const auto labels = label_spectrum(s, model);
    const auto signed_labels = add_signs(labels, uwt(s.reflectance, 4, Wavelet::haar));
    for (std::size_t n = 8; n + 8 < 64; ++n) {
        CHECK(signed_labels.labels(0, n) >= 0);
        CHECK(signed_labels.labels(0, n) == 1);
    }
}

TEST_CASE("labels CSV has one row per scale") {
    LabelArray l;
    l.labels = LabelMatrix(2, 3);
    l.labels(0, 1) = -1;
    l.labels(1, 2) = 2;
    CHECK(format_labels_csv(l) == "0,-1,0\n0,0,2\n");
}
