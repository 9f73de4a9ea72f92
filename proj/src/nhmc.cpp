#include "specnhmc/nhmc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>

#include "json.hpp"
#include "specnhmc/error.hpp"
#include "specnhmc/parallel.hpp"

namespace specnhmc {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;  // log(2*pi)
constexpr double kEmptyMass = 1e-12;

void check_distribution(std::span<const double> p, double tol, const std::string& what) {
    double total = 0.0;
    for (double v : p) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError(what + " has a negative or non-finite entry");
        total += v;
    }
    if (std::abs(total - 1.0) > tol) throw ValidationError(what + " sums to " + std::to_string(total) + ", not 1");
}

}  // namespace

void ChainParams::validate(double tol) const {
    if (k < 1 || levels < 1) throw ValidationError("chain needs k >= 1 and L >= 1");
    if (initial_probs.size() != k) throw ValidationError("initial_probs must have k entries");
    check_distribution(initial_probs, tol, "initial state distribution");
    if (transitions.size() != levels - 1) throw ValidationError("expected L-1 transition matrices");
    for (std::size_t t = 0; t < transitions.size(); ++t) {
        const auto& a = transitions[t];
        if (a.rows() != k || a.cols() != k) throw ValidationError("transition matrix must be k x k");
        for (std::size_t i = 0; i < k; ++i) {
            const auto col = a.column(i);
            check_distribution(col, tol, "transition column " + std::to_string(i) + " at scale " + std::to_string(t + 2));
        }
    }
    if (variances.rows() != levels || variances.cols() != k) throw ValidationError("variances must be L x k");
    for (double v : variances.data()) {
        if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError("state variances must be positive and finite");
    }
}

RealMatrix ChainParams::state_marginals() const {
    RealMatrix p(levels, k);
    for (std::size_t i = 0; i < k; ++i) p(0, i) = initial_probs[i];
    for (std::size_t s = 1; s < levels; ++s) {
        const auto& a = transitions[s - 1];
        for (std::size_t j = 0; j < k; ++j) {
            double acc = 0.0;
            for (std::size_t i = 0; i < k; ++i) acc += a(j, i) * p(s - 1, i);
            p(s, j) = acc;
        }
    }
    return p;
}

double log_normal_pdf(double w, double variance) { return -0.5 * (kLog2Pi + std::log(variance)) - w * w / (2.0 * variance); }

// ---------------------------------------------------------------------------
// Forward-backward
//
// Emissions at each scale are rescaled by their maximum before
// exponentiation; the forward variables are normalized per scale and the
// log normalizers accumulate into the log-likelihood.

namespace {

struct FbWorkspace {
    std::size_t levels = 0;
    std::size_t k = 0;
    std::vector<double> emit;   // L x k, exp(log b - max)
    std::vector<double> alpha;  // L x k, normalized
    std::vector<double> beta;   // L x k
    std::vector<double> norm;   // per-scale normalizer

    void resize(std::size_t l, std::size_t states) {
        levels = l;
        k = states;
        emit.resize(l * states);
        alpha.resize(l * states);
        beta.resize(l * states);
        norm.resize(l);
    }
};

double forward_pass(std::span<const double> w, const ChainParams& p, FbWorkspace& ws) {
    const std::size_t levels = ws.levels;
    const std::size_t k = ws.k;
    double loglik = 0.0;
    for (std::size_t s = 0; s < levels; ++s) {
        double peak = -std::numeric_limits<double>::infinity();
        double* e = &ws.emit[s * k];
        for (std::size_t i = 0; i < k; ++i) {
            e[i] = log_normal_pdf(w[s], p.variances(s, i));
            peak = std::max(peak, e[i]);
        }
        for (std::size_t i = 0; i < k; ++i) e[i] = std::exp(e[i] - peak);

        double* a = &ws.alpha[s * k];
        double total = 0.0;
        if (s == 0) {
            for (std::size_t i = 0; i < k; ++i) {
                a[i] = p.initial_probs[i] * e[i];
                total += a[i];
            }
        } else {
            const double* prev = &ws.alpha[(s - 1) * k];
            const auto& trans = p.transitions[s - 1];
            for (std::size_t j = 0; j < k; ++j) {
                const auto row = trans.row(j);
                double acc = 0.0;
                for (std::size_t i = 0; i < k; ++i) acc += prev[i] * row[i];
                a[j] = acc * e[j];
                total += a[j];
            }
        }
        if (!(total > 0.0) || !std::isfinite(total)) {
            throw NumericError("chain likelihood is zero at scale " + std::to_string(s + 1));
        }
        for (std::size_t i = 0; i < k; ++i) a[i] /= total;
        ws.norm[s] = total;
        loglik += peak + std::log(total);
    }
    return loglik;
}

void backward_pass(const ChainParams& p, FbWorkspace& ws) {
    const std::size_t levels = ws.levels;
    const std::size_t k = ws.k;
    std::fill_n(&ws.beta[(levels - 1) * k], k, 1.0);
    for (std::size_t s = levels - 1; s-- > 0;) {
        const auto& trans = p.transitions[s];
        const double* e = &ws.emit[(s + 1) * k];
        const double* next = &ws.beta[(s + 1) * k];
        double* b = &ws.beta[s * k];
        for (std::size_t i = 0; i < k; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < k; ++j) acc += trans(j, i) * e[j] * next[j];
            b[i] = acc / ws.norm[s + 1];
        }
    }
}

void check_chain(std::span<const double> chain, const ChainParams& params) {
    if (chain.size() != params.levels) {
        throw DimensionError("chain has " + std::to_string(chain.size()) + " scales, model has " +
                             std::to_string(params.levels));
    }
    for (std::size_t s = 0; s < chain.size(); ++s) {
        if (!std::isfinite(chain[s])) throw ValidationError("coefficient at scale " + std::to_string(s + 1) + " is not finite");
    }
}

}  // namespace

Posteriors forward_backward(std::span<const double> chain, const ChainParams& params) {
    check_chain(chain, params);
    const std::size_t levels = params.levels;
    const std::size_t k = params.k;
    FbWorkspace ws;
    ws.resize(levels, k);
    Posteriors post;
    post.log_likelihood = forward_pass(chain, params, ws);
    backward_pass(params, ws);

    post.gamma = RealMatrix(levels, k);
    for (std::size_t s = 0; s < levels; ++s) {
        double total = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            post.gamma(s, i) = ws.alpha[s * k + i] * ws.beta[s * k + i];
            total += post.gamma(s, i);
        }
        for (std::size_t i = 0; i < k; ++i) post.gamma(s, i) /= total;
    }
    post.xi.reserve(levels - 1);
    for (std::size_t t = 0; t + 1 < levels; ++t) {
        RealMatrix x(k, k);
        const auto& trans = params.transitions[t];
        double total = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            for (std::size_t j = 0; j < k; ++j) {
                x(i, j) = ws.alpha[t * k + i] * trans(j, i) * ws.emit[(t + 1) * k + j] * ws.beta[(t + 1) * k + j];
                total += x(i, j);
            }
        }
        for (double& v : x.data()) v /= total;
        post.xi.push_back(std::move(x));
    }
    return post;
}

double chain_log_likelihood(std::span<const double> chain, const ChainParams& params) {
    check_chain(chain, params);
    FbWorkspace ws;
    ws.resize(params.levels, params.k);
    return forward_pass(chain, params, ws);
}

// ---------------------------------------------------------------------------
// EM

std::vector<double> variance_floors(const std::vector<std::vector<double>>& chains) {
    const std::size_t levels = chains.front().size();
    std::vector<double> floors(levels, 0.0);
    for (std::size_t s = 0; s < levels; ++s) {
        double acc = 0.0;
        for (const auto& c : chains) acc += c[s] * c[s];
        floors[s] = std::max(1e-8 * acc / static_cast<double>(chains.size()), 1e-20);
    }
    return floors;
}

ChainParams initial_params(const std::vector<std::vector<double>>& chains, std::size_t k) {
    const std::size_t m = chains.size();
    const std::size_t levels = chains.front().size();
    const auto floors = variance_floors(chains);
    ChainParams p;
    p.k = k;
    p.levels = levels;
    p.initial_probs.assign(k, 1.0 / static_cast<double>(k));
    RealMatrix a(k, k, k > 1 ? 0.2 / static_cast<double>(k - 1) : 1.0);
    for (std::size_t i = 0; i < k; ++i) a(i, i) = k > 1 ? 0.8 : 1.0;
    p.transitions.assign(levels - 1, a);
    p.variances = RealMatrix(levels, k);
    std::vector<double> sq(m);
    for (std::size_t s = 0; s < levels; ++s) {
        for (std::size_t i = 0; i < m; ++i) sq[i] = chains[i][s] * chains[i][s];
        std::sort(sq.begin(), sq.end());
        for (std::size_t g = 0; g < k; ++g) {
            const std::size_t lo = g * m / k;
            const std::size_t hi = std::min(m, std::max(lo + 1, (g + 1) * m / k));
            double acc = 0.0;
            for (std::size_t i = lo; i < hi; ++i) acc += sq[i];
            p.variances(s, g) = std::max(acc / static_cast<double>(hi - lo), floors[s]);
        }
    }
    return p;
}

ChainParams order_states_by_variance(const ChainParams& params) {
    const std::size_t k = params.k;
    const std::size_t levels = params.levels;
    std::vector<std::vector<std::size_t>> perm(levels, std::vector<std::size_t>(k));
    for (std::size_t s = 0; s < levels; ++s) {
        std::iota(perm[s].begin(), perm[s].end(), 0);
        std::stable_sort(perm[s].begin(), perm[s].end(),
                         [&](std::size_t a, std::size_t b) { return params.variances(s, a) < params.variances(s, b); });
    }
    ChainParams out = params;
    for (std::size_t a = 0; a < k; ++a) out.initial_probs[a] = params.initial_probs[perm[0][a]];
    for (std::size_t s = 0; s < levels; ++s)
        for (std::size_t a = 0; a < k; ++a) out.variances(s, a) = params.variances(s, perm[s][a]);
    for (std::size_t t = 0; t + 1 < levels; ++t)
        for (std::size_t b = 0; b < k; ++b)
            for (std::size_t a = 0; a < k; ++a) out.transitions[t](b, a) = params.transitions[t](perm[t + 1][b], perm[t][a]);
    return out;
}

ChainParams random_params(std::size_t k, std::size_t levels, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::exponential_distribution<double> expo(1.0);
    std::uniform_real_distribution<double> logvar(std::log(1e-3), 0.0);
    auto dirichlet = [&](std::span<double> out) {
        double total = 0.0;
        for (double& v : out) total += (v = expo(rng));
        for (double& v : out) v /= total;
    };
    ChainParams p;
    p.k = k;
    p.levels = levels;
    p.initial_probs.resize(k);
    dirichlet(p.initial_probs);
    for (std::size_t t = 0; t + 1 < levels; ++t) {
        RealMatrix a(k, k);
        std::vector<double> col(k);
        for (std::size_t i = 0; i < k; ++i) {
            dirichlet(col);
            for (std::size_t j = 0; j < k; ++j) a(j, i) = col[j];
        }
        p.transitions.push_back(std::move(a));
    }
    p.variances = RealMatrix(levels, k);
    for (double& v : p.variances.data()) v = std::exp(logvar(rng));
    return p;
}

EmResult em_train_from(const std::vector<std::vector<double>>& chains, ChainParams params, const EmConfig& config) {
    if (chains.size() < 2) throw DomainError("EM needs at least two training chains");
    const std::size_t levels = params.levels;
    const std::size_t k = params.k;
    if (k < 2) throw DomainError("EM needs k >= 2 states");
    for (const auto& c : chains) {
        if (c.size() != levels) throw DimensionError("training chains must all have length L");
        check_chain(c, params);
    }
    params.validate();
    const auto floors = variance_floors(chains);
    const auto m = static_cast<double>(chains.size());

    EmResult result;
    FbWorkspace ws;
    ws.resize(levels, k);
    std::vector<double> init_acc(k);
    std::vector<double> trans_acc((levels - 1) * k * k);  // [t][i][j]
    std::vector<double> var_num(levels * k);
    std::vector<double> var_den(levels * k);
    std::vector<double> gamma_row(k);
    std::vector<std::string> warned;

    auto warn_once = [&](const std::string& msg) {
        if (std::find(warned.begin(), warned.end(), msg) == warned.end()) {
            warned.push_back(msg);
            result.warnings.push_back(msg);
        }
    };

    for (std::size_t iter = 0;; ++iter) {
        std::fill(init_acc.begin(), init_acc.end(), 0.0);
        std::fill(trans_acc.begin(), trans_acc.end(), 0.0);
        std::fill(var_num.begin(), var_num.end(), 0.0);
        std::fill(var_den.begin(), var_den.end(), 0.0);
        double total_ll = 0.0;

        // E step: accumulate expected sufficient statistics.
        for (const auto& w : chains) {
            total_ll += forward_pass(w, params, ws);
            backward_pass(params, ws);
            for (std::size_t s = 0; s < levels; ++s) {
                double total = 0.0;
                double* gp = gamma_row.data();
                for (std::size_t i = 0; i < k; ++i) total += (gp[i] = ws.alpha[s * k + i] * ws.beta[s * k + i]);
                const double w2 = w[s] * w[s];
                for (std::size_t i = 0; i < k; ++i) {
                    const double gi = gp[i] / total;
                    if (s == 0) init_acc[i] += gi;
                    var_num[s * k + i] += gi * w2;
                    var_den[s * k + i] += gi;
                }
            }
            for (std::size_t t = 0; t + 1 < levels; ++t) {
                const auto& trans = params.transitions[t];
                double* acc = &trans_acc[t * k * k];
                const double* a = &ws.alpha[t * k];
                const double* e = &ws.emit[(t + 1) * k];
                const double* b = &ws.beta[(t + 1) * k];
                const double inv = 1.0 / ws.norm[t + 1];
                for (std::size_t i = 0; i < k; ++i)
                    for (std::size_t j = 0; j < k; ++j) acc[i * k + j] += a[i] * trans(j, i) * e[j] * b[j] * inv;
            }
        }
        result.log_likelihoods.push_back(total_ll);
        result.iterations = iter;

        if (result.log_likelihoods.size() >= 2) {
            const double prev = result.log_likelihoods[result.log_likelihoods.size() - 2];
            if (std::abs(total_ll - prev) <= config.tol * std::max(std::abs(prev), 1e-300)) {
                result.converged = true;
                break;
            }
        }
        if (iter >= config.max_iter) break;

        // M step.
        for (std::size_t i = 0; i < k; ++i) params.initial_probs[i] = init_acc[i] / m;
        {
            const double total = std::accumulate(params.initial_probs.begin(), params.initial_probs.end(), 0.0);
            for (double& v : params.initial_probs) v /= total;
        }
        for (std::size_t t = 0; t + 1 < levels; ++t) {
            auto& trans = params.transitions[t];
            const double* acc = &trans_acc[t * k * k];
            for (std::size_t i = 0; i < k; ++i) {
                double den = 0.0;
                for (std::size_t j = 0; j < k; ++j) den += acc[i * k + j];
                if (den < kEmptyMass) {
                    for (std::size_t j = 0; j < k; ++j) trans(j, i) = 1.0 / static_cast<double>(k);
                    warn_once("state " + std::to_string(i) + " has no mass at scale " + std::to_string(t + 1) +
                              "; transition column reset to uniform");
                } else {
                    for (std::size_t j = 0; j < k; ++j) trans(j, i) = acc[i * k + j] / den;
                }
            }
        }
        for (std::size_t s = 0; s < levels; ++s) {
            for (std::size_t i = 0; i < k; ++i) {
                const double den = var_den[s * k + i];
                if (den < kEmptyMass) {
                    params.variances(s, i) = floors[s];
                    warn_once("state " + std::to_string(i) + " has no mass at scale " + std::to_string(s + 1) +
                              "; variance held at floor");
                } else {
                    params.variances(s, i) = std::max(var_num[s * k + i] / den, floors[s]);
                }
            }
        }
    }
    result.params = config.order_states ? order_states_by_variance(params) : params;
    return result;
}

EmResult em_train(const std::vector<std::vector<double>>& chains, std::size_t k, const EmConfig& config) {
    if (chains.size() < 2) throw DomainError("EM needs at least two training chains");
    if (k < 2) throw DomainError("EM needs k >= 2 states");
    ChainParams start = initial_params(chains, k);
    if (config.random_init) {
        auto r = random_params(k, start.levels, config.seed);
        // Keep data-driven variance magnitudes so the start is not absurdly far off.
        for (std::size_t s = 0; s < start.levels; ++s) {
            double mean = 0.0;
            for (std::size_t i = 0; i < k; ++i) mean += start.variances(s, i);
            mean /= static_cast<double>(k);
            for (std::size_t i = 0; i < k; ++i) r.variances(s, i) = std::max(r.variances(s, i) * mean * 3.0, 1e-20);
        }
        start = std::move(r);
    }
    return em_train_from(chains, std::move(start), config);
}

// ---------------------------------------------------------------------------

ChainSample sample_chain(const ChainParams& params, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    auto draw = [&](auto&& prob) {
        const double u = unit(rng);
        double acc = 0.0;
        for (std::size_t i = 0; i < params.k; ++i) {
            acc += prob(i);
            if (u < acc) return static_cast<int>(i);
        }
        // u landed in the rounding gap: return the last state with mass.
        for (std::size_t i = params.k; i-- > 0;)
            if (prob(i) > 0.0) return static_cast<int>(i);
        return 0;
    };
    ChainSample out;
    out.states.resize(params.levels);
    out.coeffs.resize(params.levels);
    for (std::size_t s = 0; s < params.levels; ++s) {
        if (s == 0) {
            out.states[0] = draw([&](std::size_t i) { return params.initial_probs[i]; });
        } else {
            const auto parent = static_cast<std::size_t>(out.states[s - 1]);
            out.states[s] = draw([&](std::size_t j) { return params.transitions[s - 1](j, parent); });
        }
        out.coeffs[s] = std::sqrt(params.variances(s, static_cast<std::size_t>(out.states[s]))) * normal(rng);
    }
    return out;
}

// ---------------------------------------------------------------------------

NhmcModel train_model(const std::vector<CoeffMatrix>& coeffs, std::size_t k, const TrainConfig& config) {
    if (coeffs.size() < 2) throw DomainError("model training needs at least two spectra");
    const std::size_t levels = coeffs.front().levels();
    const std::size_t bands = coeffs.front().bands();
    if (bands < 1) throw DimensionError("coefficient matrices have no bands");
    for (const auto& c : coeffs) {
        if (c.levels() != levels || c.bands() != bands) throw DimensionError("coefficient matrices differ in shape");
        for (double v : c.values.data())
            if (!std::isfinite(v)) throw ValidationError("coefficient tensor contains a non-finite value");
    }

    NhmcModel model;
    model.levels = levels;
    model.k = k;
    model.wavelet = coeffs.front().wavelet;
    model.per_wavelength.resize(bands);
    model.iterations.resize(bands);
    std::vector<double> band_ll(bands);
    std::vector<std::vector<std::string>> band_warnings(bands);

    parallel_for(bands, config.workers, [&](std::size_t n) {
        std::vector<std::vector<double>> chains(coeffs.size());
        for (std::size_t m = 0; m < coeffs.size(); ++m) chains[m] = coeffs[m].chain(n);
        EmConfig em = config.em;
        em.seed = config.em.seed + n;
        try {
            auto r = em_train(chains, k, em);
            model.per_wavelength[n] = std::move(r.params);
            model.iterations[n] = r.iterations;
            band_ll[n] = r.log_likelihoods.back();
            band_warnings[n] = std::move(r.warnings);
        } catch (const Error& e) {
            throw Error("wavelength index " + std::to_string(n) + ": " + e.what());
        }
    });
    for (std::size_t n = 0; n < bands; ++n) {
        model.total_log_likelihood += band_ll[n];
        for (auto& w : band_warnings[n]) model.warnings.push_back("wavelength index " + std::to_string(n) + ": " + w);
    }
    return model;
}

// ---------------------------------------------------------------------------

using nlohmann::json;

std::string model_to_json(const NhmcModel& model) {
    json j;
    j["format"] = "specnhmc-model";
    j["version"] = 1;
    j["model_kind"] = "gmm";
    j["transition_indexing"] =
        "transitions[t][j][i] = P(S_{t+1} = j | S_t = i) with scales 0-based coarse to fine; every column sums to 1";
    j["k"] = model.k;
    j["L"] = model.levels;
    j["N"] = model.bands();
    j["wavelet"] = to_string(model.wavelet);
    j["grid"] = model.grid;
    j["training"] = {{"iterations", model.iterations},
                     {"total_log_likelihood", model.total_log_likelihood},
                     {"warnings", model.warnings}};
    json bands = json::array();
    for (const auto& p : model.per_wavelength) {
        json b;
        b["initial_probs"] = p.initial_probs;
        json trans = json::array();
        for (const auto& a : p.transitions) {
            json rows = json::array();
            for (std::size_t r = 0; r < a.rows(); ++r) rows.push_back(std::vector<double>(a.row(r).begin(), a.row(r).end()));
            trans.push_back(std::move(rows));
        }
        b["transitions"] = std::move(trans);
        json vars = json::array();
        for (std::size_t s = 0; s < p.variances.rows(); ++s)
            vars.push_back(std::vector<double>(p.variances.row(s).begin(), p.variances.row(s).end()));
        b["variances"] = std::move(vars);
        bands.push_back(std::move(b));
    }
    j["wavelengths"] = std::move(bands);
    return j.dump(1) + "\n";
}

namespace {

RealMatrix matrix_from_json(const json& rows, std::size_t r, std::size_t c, const std::string& what) {
    if (!rows.is_array() || rows.size() != r) throw ParseError(what + ": expected " + std::to_string(r) + " rows");
    RealMatrix m(r, c);
    for (std::size_t i = 0; i < r; ++i) {
        const auto& row = rows[i];
        if (!row.is_array() || row.size() != c) throw ParseError(what + ": expected " + std::to_string(c) + " columns");
        for (std::size_t j = 0; j < c; ++j) m(i, j) = row[j].get<double>();
    }
    return m;
}

}  // namespace

NhmcModel model_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("model file is not valid JSON: ") + e.what());
    }
    try {
        if (j.value("model_kind", std::string{}) != "gmm") throw ParseError("model file is not a gmm model");
        if (j.at("version").get<int>() != 1) throw ParseError("unsupported model file version");
        NhmcModel model;
        model.k = j.at("k").get<std::size_t>();
        model.levels = j.at("L").get<std::size_t>();
        const auto bands = j.at("N").get<std::size_t>();
        model.wavelet = wavelet_from_string(j.at("wavelet").get<std::string>());
        model.grid = j.at("grid").get<std::vector<double>>();
        const auto& training = j.at("training");
        model.iterations = training.at("iterations").get<std::vector<std::size_t>>();
        model.total_log_likelihood = training.at("total_log_likelihood").get<double>();
        model.warnings = training.at("warnings").get<std::vector<std::string>>();
        const auto& arr = j.at("wavelengths");
        if (!arr.is_array() || arr.size() != bands) throw ParseError("model file: wavelengths array does not have N entries");
        for (std::size_t n = 0; n < bands; ++n) {
            const auto& b = arr[n];
            ChainParams p;
            p.k = model.k;
            p.levels = model.levels;
            p.initial_probs = b.at("initial_probs").get<std::vector<double>>();
            const auto& trans = b.at("transitions");
            if (!trans.is_array() || trans.size() + 1 != model.levels) throw ParseError("model file: expected L-1 transition matrices");
            for (const auto& t : trans) p.transitions.push_back(matrix_from_json(t, model.k, model.k, "transition matrix"));
            p.variances = matrix_from_json(b.at("variances"), model.levels, model.k, "variances");
            p.validate();
            model.per_wavelength.push_back(std::move(p));
        }
        if (!model.grid.empty() && model.grid.size() != bands) throw ParseError("model file: grid length differs from N");
        return model;
    } catch (const json::exception& e) {
        throw ParseError(std::string("model file: ") + e.what());
    }
}

}  // namespace specnhmc
