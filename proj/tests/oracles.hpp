#pragma once

// Brute-force reference computations for the tests. Nothing here calls the
// library's algorithms; only its parameter structs are read.

#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "specnhmc/mog.hpp"
#include "specnhmc/nhmc.hpp"

namespace oracle {

using specnhmc::ChainParams;
using specnhmc::MogChainParams;
using specnhmc::RealMatrix;

inline double normal_pdf(double w, double var) {
    return std::exp(-w * w / (2.0 * var)) / std::sqrt(2.0 * std::numbers::pi * var);
}

/// Calls f(path) for every state path of length `levels` over `k` states.
template <typename F>
void for_each_path(std::size_t k, std::size_t levels, F&& f) {
    std::vector<int> path(levels, 0);
    for (;;) {
        f(path);
        std::size_t pos = levels;
        while (pos > 0) {
            --pos;
            if (++path[pos] < static_cast<int>(k)) break;
            path[pos] = 0;
            if (pos == 0) return;
        }
        if (levels == 0) return;
    }
}

/// P(path) under the chain prior, no emissions.
inline double path_prior(const ChainParams& p, const std::vector<int>& path) {
    double v = p.initial_probs[path[0]];
    for (std::size_t t = 0; t + 1 < path.size(); ++t) v *= p.transitions[t](path[t + 1], path[t]);
    return v;
}

/// p(path, w) of a GMM chain.
inline double gmm_joint(const ChainParams& p, std::span<const double> w, const std::vector<int>& path) {
    double v = path_prior(p, path);
    for (std::size_t s = 0; s < path.size(); ++s) v *= normal_pdf(w[s], p.variances(s, path[s]));
    return v;
}

/// Mixture density of the large state, evaluated straight from the weights.
inline double mog_large_pdf(const MogChainParams& p, std::size_t s, double w) {
    double v = 0.0;
    for (std::size_t c = 0; c < p.large_weights[s].size(); ++c) v += p.large_weights[s][c] * normal_pdf(w, p.large_variances[s][c]);
    return v;
}

inline double mog_joint(const MogChainParams& p, std::span<const double> w, const std::vector<int>& path) {
    double v = p.initial_probs[path[0]];
    for (std::size_t t = 0; t + 1 < path.size(); ++t) v *= p.transitions[t](path[t + 1], path[t]);
    for (std::size_t s = 0; s < path.size(); ++s)
        v *= path[s] == 0 ? normal_pdf(w[s], p.small_variance[s]) : mog_large_pdf(p, s, w[s]);
    return v;
}

struct Enumeration {
    double likelihood = 0.0;  // sum over paths of p(path, w)
    double best_joint = 0.0;  // max over paths
    std::vector<int> best_path;
    RealMatrix gamma;             // L x k
    std::vector<RealMatrix> xi;   // xi[t](i, j)
};

inline Enumeration enumerate_gmm(const ChainParams& p, std::span<const double> w) {
    Enumeration e;
    const std::size_t L = p.levels;
    e.gamma = RealMatrix(L, p.k, 0.0);
    for (std::size_t t = 0; t + 1 < L; ++t) e.xi.emplace_back(p.k, p.k, 0.0);
    for_each_path(p.k, L, [&](const std::vector<int>& path) {
        const double j = gmm_joint(p, w, path);
        e.likelihood += j;
        if (j > e.best_joint) {
            e.best_joint = j;
            e.best_path = path;
        }
        for (std::size_t s = 0; s < L; ++s) e.gamma(s, path[s]) += j;
        for (std::size_t t = 0; t + 1 < L; ++t) e.xi[t](path[t], path[t + 1]) += j;
    });
    for (auto& v : e.gamma.data()) v /= e.likelihood;
    for (auto& x : e.xi)
        for (auto& v : x.data()) v /= e.likelihood;
    return e;
}

inline Enumeration enumerate_mog(const MogChainParams& p, std::span<const double> w) {
    Enumeration e;
    for_each_path(2, p.levels, [&](const std::vector<int>& path) {
        const double j = mog_joint(p, w, path);
        e.likelihood += j;
        if (j > e.best_joint) {
            e.best_joint = j;
            e.best_path = path;
        }
    });
    return e;
}

// ---------------------------------------------------------------------------
// The collapsed chain as a function of the GMM chain: Z_s = [S_s != 0].
// Every quantity below is a ratio of sums of path priors.

/// P(S_s = i) by summing path priors.
inline RealMatrix state_marginals(const ChainParams& p) {
    RealMatrix m(p.levels, p.k, 0.0);
    for_each_path(p.k, p.levels, [&](const std::vector<int>& path) {
        const double v = path_prior(p, path);
        for (std::size_t s = 0; s < p.levels; ++s) m(s, path[s]) += v;
    });
    return m;
}

/// P(Z_{t+1} = b | Z_t = a) as a 2 x 2 matrix (b, a).
inline RealMatrix z_transition(const ChainParams& p, std::size_t t) {
    std::array<std::array<double, 2>, 2> joint{};
    for_each_path(p.k, p.levels, [&](const std::vector<int>& path) {
        const int a = path[t] != 0;
        const int b = path[t + 1] != 0;
        joint[a][b] += path_prior(p, path);
    });
    RealMatrix out(2, 2, 0.0);
    for (int a = 0; a < 2; ++a) {
        const double total = joint[a][0] + joint[a][1];
        for (int b = 0; b < 2; ++b) out(b, a) = joint[a][b] / total;
    }
    return out;
}

/// p(w_s = w | Z_s = z).
inline double z_emission(const ChainParams& p, std::size_t s, int z, double w) {
    double num = 0.0;
    double den = 0.0;
    for_each_path(p.k, p.levels, [&](const std::vector<int>& path) {
        if ((path[s] != 0) != (z != 0)) return;
        const double v = path_prior(p, path);
        num += v * normal_pdf(w, p.variances(s, path[s]));
        den += v;
    });
    return num / den;
}

/// Marginal density of w_s under the GMM chain: sum_paths P(path) N(w; var(s, path_s)).
inline double gmm_marginal_pdf(const ChainParams& p, std::size_t s, double w) {
    double v = 0.0;
    for_each_path(p.k, p.levels, [&](const std::vector<int>& path) {
        v += path_prior(p, path) * normal_pdf(w, p.variances(s, path[s]));
    });
    return v;
}

// ---------------------------------------------------------------------------
// Wavelets

/// Half-point symmetric reflection into [0, n).
inline long long reflect(long long i, long long n) {
    while (i < 0 || i >= n) {
        if (i < 0) i = -1 - i;
        if (i >= n) i = 2 * n - 1 - i;
    }
    return i;
}

/// Haar coefficient by an explicit inner product with the analysing vector.
inline double haar_coeff(std::span<const double> x, std::size_t levels, std::size_t row, std::size_t n) {
    const long long d = 1LL << (levels - row);
    const long long N = static_cast<long long>(x.size());
    std::vector<double> psi(x.size(), 0.0);  // folded analysing function
    const double a = 1.0 / std::sqrt(static_cast<double>(d));
    for (long long m = static_cast<long long>(n) - d / 2; m < static_cast<long long>(n); ++m) psi[reflect(m, N)] += a;
    for (long long m = static_cast<long long>(n); m < static_cast<long long>(n) + d / 2; ++m) psi[reflect(m, N)] -= a;
    double v = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) v += psi[i] * x[i];
    return v;
}

// ---------------------------------------------------------------------------
// Blur kernel

/// Off-centre ratio e of the 3x3 stencil [e^2 e e^2; e 1 e; e^2 e e^2] whose
/// normalized centre is dmp: 1 / (1 + 2e)^2 = dmp.
inline double dmp_ratio(double dmp) { return (1.0 / std::sqrt(dmp) - 1.0) / 2.0; }

// ---------------------------------------------------------------------------
// Random parameters drawn independently of the library's own sampler.

inline std::vector<double> random_distribution(std::size_t k, std::mt19937_64& rng) {
    std::exponential_distribution<double> ex(1.0);
    std::vector<double> v(k);
    double s = 0.0;
    for (auto& x : v) s += (x = ex(rng) + 1e-3);
    for (auto& x : v) x /= s;
    return v;
}

inline ChainParams random_chain(std::size_t k, std::size_t levels, std::mt19937_64& rng) {
    ChainParams p;
    p.k = k;
    p.levels = levels;
    p.initial_probs = random_distribution(k, rng);
    for (std::size_t t = 0; t + 1 < levels; ++t) {
        RealMatrix a(k, k);
        for (std::size_t i = 0; i < k; ++i) {
            const auto col = random_distribution(k, rng);
            for (std::size_t j = 0; j < k; ++j) a(j, i) = col[j];
        }
        p.transitions.push_back(a);
    }
    std::uniform_real_distribution<double> lv(-1.5, 1.0);
    p.variances = RealMatrix(levels, k);
    for (auto& v : p.variances.data()) v = std::pow(10.0, lv(rng));
    return p;
}

inline std::vector<double> random_chain_values(std::size_t levels, std::mt19937_64& rng) {
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<double> w(levels);
    for (auto& x : w) x = nd(rng);
    return w;
}

}  // namespace oracle
