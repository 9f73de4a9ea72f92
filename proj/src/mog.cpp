#include "specnhmc/mog.hpp"

#include <cmath>
#include <algorithm>
#include <limits>
#include <numbers>

#include "json.hpp"
#include "specnhmc/error.hpp"

namespace specnhmc {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

void check_probs(std::span<const double> p, const std::string& what) {
    double total = 0.0;
    for (double v : p) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError(what + " has a negative or non-finite entry");
        total += v;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ValidationError(what + " does not sum to 1");
}

double log_sum_exp(std::span<const double> v) {
    double peak = -std::numeric_limits<double>::infinity();
    for (double x : v) peak = std::max(peak, x);
    if (!std::isfinite(peak)) return peak;
    double acc = 0.0;
    for (double x : v) acc += std::exp(x - peak);
    return peak + std::log(acc);
}

}  // namespace

void MogChainParams::validate(double tol) const {
    if (std::abs(initial_probs[0] + initial_probs[1] - 1.0) > tol) throw ValidationError("MOG initial probabilities do not sum to 1");
    if (transitions.size() + 1 != levels) throw ValidationError("MOG chain needs L-1 transition matrices");
    for (const auto& b : transitions) {
        if (b.rows() != 2 || b.cols() != 2) throw ValidationError("MOG transition matrix must be 2 x 2");
        for (std::size_t a = 0; a < 2; ++a)
            if (std::abs(b(0, a) + b(1, a) - 1.0) > tol) throw ValidationError("MOG transition column does not sum to 1");
    }
    if (small_variance.size() != levels || large_weights.size() != levels || large_variances.size() != levels) {
        throw ValidationError("MOG emission parameters must cover every scale");
    }
    for (std::size_t s = 0; s < levels; ++s) {
        if (!(small_variance[s] > 0.0)) throw ValidationError("MOG small-state variance must be positive");
        if (large_weights[s].size() != large_variances[s].size() || large_weights[s].empty()) {
            throw ValidationError("MOG large-state mixture is empty or ragged");
        }
        double total = 0.0;
        for (double w : large_weights[s]) total += w;
        if (std::abs(total - 1.0) > tol) throw ValidationError("MOG mixture weights do not sum to 1");
        for (double v : large_variances[s])
            if (!(v > 0.0)) throw ValidationError("MOG large-state variance must be positive");
    }
}

std::array<double, 2> collapse_state_probs(std::span<const double> probs) {
    if (probs.empty()) throw ValidationError("state probability vector is empty");
    check_probs(probs, "state probability vector");
    return {probs[0], 1.0 - probs[0]};
}

RealMatrix collapse_transitions(const RealMatrix& trans, std::span<const double> parent) {
    const std::size_t k = trans.rows();
    if (trans.cols() != k || parent.size() != k || k < 2) throw DimensionError("transition matrix and marginals must be k x k and k");
    check_probs(parent, "parent-scale marginals");
    for (std::size_t i = 0; i < k; ++i) check_probs(trans.column(i), "transition column " + std::to_string(i));

    double large_mass = 0.0;
    for (std::size_t i = 1; i < k; ++i) large_mass += parent[i];
    if (!(large_mass > 0.0)) throw DegenerateMassError("parent-scale large states carry no probability mass");
    if (k == 2) return trans;  // nothing to merge; avoids p * x / p rounding

    double to_small = 0.0;
    double to_large = 0.0;
    double small_to_large = 0.0;
    for (std::size_t j = 1; j < k; ++j) small_to_large += trans(j, 0);
    for (std::size_t i = 1; i < k; ++i) {
        to_small += trans(0, i) * parent[i];
        double stay = 0.0;
        for (std::size_t j = 1; j < k; ++j) stay += trans(j, i);
        to_large += parent[i] * stay;
    }
    RealMatrix b(2, 2);
    b(0, 0) = trans(0, 0);
    b(1, 0) = small_to_large;
    b(0, 1) = to_small / large_mass;
    b(1, 1) = to_large / large_mass;
    return b;
}

double mog_log_conditional_pdf(double w, std::size_t scale, int which, const MogChainParams& params) {
    if (scale >= params.levels) throw DomainError("scale index out of range");
    if (which == 0) return -0.5 * (kLog2Pi + std::log(params.small_variance[scale])) - w * w / (2.0 * params.small_variance[scale]);
    if (which != 1) throw DomainError("MOG state must be 0 or 1");
    const auto& weights = params.large_weights[scale];
    const auto& vars = params.large_variances[scale];
    std::vector<double> terms(weights.size());
    for (std::size_t i = 0; i < weights.size(); ++i) {
        terms[i] = std::log(weights[i]) - 0.5 * (kLog2Pi + std::log(vars[i])) - w * w / (2.0 * vars[i]);
    }
    return log_sum_exp(terms);
}

double mog_conditional_pdf(double w, std::size_t scale, int which, const MogChainParams& params) {
    if (scale >= params.levels) throw DomainError("scale index out of range");
    if (which == 0) {
        const double v = params.small_variance[scale];
        return std::exp(-w * w / (2.0 * v)) / std::sqrt(2.0 * std::numbers::pi * v);
    }
    if (which != 1) throw DomainError("MOG state must be 0 or 1");
    const auto& weights = params.large_weights[scale];
    const auto& vars = params.large_variances[scale];
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        acc += weights[i] * std::exp(-w * w / (2.0 * vars[i])) / std::sqrt(2.0 * std::numbers::pi * vars[i]);
    }
    return acc;
}

MogCollapse collapse_chain(const ChainParams& params) {
    const std::size_t k = params.k;
    const std::size_t levels = params.levels;
    if (k < 2) throw DomainError("collapse needs a GMM chain with k >= 2");
    const RealMatrix marginals = params.state_marginals();

    MogCollapse out;
    auto& mog = out.params;
    mog.levels = levels;
    mog.initial_probs = collapse_state_probs(params.initial_probs);
    for (std::size_t s = 0; s < levels; ++s) {
        mog.small_variance.push_back(params.variances(s, 0));
        std::vector<double> weights(k - 1);
        std::vector<double> vars(k - 1);
        double large = 0.0;
        for (std::size_t i = 1; i < k; ++i) {
            weights[i - 1] = marginals(s, i);
            vars[i - 1] = params.variances(s, i);
            large += marginals(s, i);
        }
        if (large > 0.0) {
            for (double& w : weights) w /= large;
        } else {
            for (double& w : weights) w = 1.0 / static_cast<double>(k - 1);
            out.warnings.push_back("no large-state mass at scale " + std::to_string(s + 1) + "; equal mixture weights used");
        }
        mog.large_weights.push_back(std::move(weights));
        mog.large_variances.push_back(std::move(vars));
    }
    for (std::size_t t = 0; t + 1 < levels; ++t) {
        const auto parent = marginals.row(t);
        try {
            mog.transitions.push_back(collapse_transitions(params.transitions[t], parent));
        } catch (const DegenerateMassError&) {
            RealMatrix b(2, 2);
            b(0, 0) = params.transitions[t](0, 0);
            b(1, 0) = 1.0 - b(0, 0);
            b(0, 1) = 0.5;
            b(1, 1) = 0.5;
            mog.transitions.push_back(b);
            out.warnings.push_back("no large-state mass at scale " + std::to_string(t + 1) +
                                   "; uniform large-state transition column used");
        }
    }
    return out;
}

MogModel collapse_model(const NhmcModel& model) {
    MogModel out;
    out.grid = model.grid;
    out.wavelet = model.wavelet;
    out.levels = model.levels;
    out.source_k = model.k;
    out.per_wavelength.reserve(model.bands());
    for (std::size_t n = 0; n < model.bands(); ++n) {
        auto c = collapse_chain(model.per_wavelength[n]);
        for (auto& w : c.warnings) out.warnings.push_back("wavelength index " + std::to_string(n) + ": " + w);
        out.per_wavelength.push_back(std::move(c.params));
    }
    return out;
}

namespace {

void check_mog_chain(std::span<const double> chain, const MogChainParams& params) {
    if (chain.size() != params.levels) throw DimensionError("chain length differs from the model's scale count");
    for (std::size_t s = 0; s < chain.size(); ++s) {
        if (!std::isfinite(chain[s])) throw ValidationError("coefficient at scale " + std::to_string(s + 1) + " is not finite");
    }
}

}  // namespace

ViterbiPath viterbi_mog(std::span<const double> chain, const MogChainParams& params) {
    check_mog_chain(chain, params);
    RealMatrix emis(params.levels, 2);
    for (std::size_t s = 0; s < params.levels; ++s)
        for (int z = 0; z < 2; ++z) emis(s, static_cast<std::size_t>(z)) = mog_log_conditional_pdf(chain[s], s, z, params);
    std::vector<RealMatrix> trans;
    for (const auto& b : params.transitions) {
        RealMatrix lb(2, 2);
        for (std::size_t i = 0; i < 4; ++i) lb.data()[i] = std::log(b.data()[i]);
        trans.push_back(std::move(lb));
    }
    const double init[2] = {std::log(params.initial_probs[0]), std::log(params.initial_probs[1])};
    return viterbi_log(init, trans, emis);
}

double mog_chain_log_likelihood(std::span<const double> chain, const MogChainParams& params) {
    check_mog_chain(chain, params);
    double alpha[2];
    double loglik = 0.0;
    for (std::size_t s = 0; s < params.levels; ++s) {
        double e[2] = {mog_log_conditional_pdf(chain[s], s, 0, params), mog_log_conditional_pdf(chain[s], s, 1, params)};
        const double peak = std::max(e[0], e[1]);
        e[0] = std::exp(e[0] - peak);
        e[1] = std::exp(e[1] - peak);
        double next[2];
        if (s == 0) {
            next[0] = params.initial_probs[0] * e[0];
            next[1] = params.initial_probs[1] * e[1];
        } else {
            const auto& b = params.transitions[s - 1];
            next[0] = (b(0, 0) * alpha[0] + b(0, 1) * alpha[1]) * e[0];
            next[1] = (b(1, 0) * alpha[0] + b(1, 1) * alpha[1]) * e[1];
        }
        const double total = next[0] + next[1];
        if (!(total > 0.0)) throw NumericError("chain likelihood is zero at scale " + std::to_string(s + 1));
        alpha[0] = next[0] / total;
        alpha[1] = next[1] / total;
        loglik += peak + std::log(total);
    }
    return loglik;
}

LabelArray label_coeffs_mog(const CoeffMatrix& coeffs, const MogModel& model) {
    if (coeffs.levels() != model.levels || coeffs.bands() != model.bands()) {
        throw DimensionError("coefficient matrix shape differs from the model");
    }
    LabelArray out;
    out.labels = LabelMatrix(model.levels, model.bands());
    out.log_likelihoods.resize(model.bands());
    for (std::size_t n = 0; n < model.bands(); ++n) {
        const auto chain = coeffs.chain(n);
        const auto path = viterbi_mog(chain, model.per_wavelength[n]);
        for (std::size_t s = 0; s < model.levels; ++s) out.labels(s, n) = path.states[s];
        out.log_likelihoods[n] = mog_chain_log_likelihood(chain, model.per_wavelength[n]);
    }
    return out;
}

LabelArray label_spectrum_mog(const Spectrum& spectrum, const MogModel& model) {
    check_on_grid(spectrum, model.grid);
    return label_coeffs_mog(uwt(spectrum.reflectance, model.levels, model.wavelet), model);
}

// ---------------------------------------------------------------------------

using nlohmann::json;

std::string mog_model_to_json(const MogModel& model) {
    json j;
    j["format"] = "specnhmc-model";
    j["version"] = 1;
    j["model_kind"] = "mog";
    j["transition_indexing"] =
        "transitions[t][b][a] = P(Z_{t+1} = b | Z_t = a) with scales 0-based coarse to fine; every column sums to 1";
    j["k"] = model.source_k;
    j["L"] = model.levels;
    j["N"] = model.bands();
    j["wavelet"] = to_string(model.wavelet);
    j["grid"] = model.grid;
    j["warnings"] = model.warnings;
    json bands = json::array();
    for (const auto& p : model.per_wavelength) {
        json b;
        b["initial_probs"] = p.initial_probs;
        json trans = json::array();
        for (const auto& m : p.transitions) trans.push_back({{m(0, 0), m(0, 1)}, {m(1, 0), m(1, 1)}});
        b["transitions"] = std::move(trans);
        b["small_variance"] = p.small_variance;
        b["large_weights"] = p.large_weights;
        b["large_variances"] = p.large_variances;
        bands.push_back(std::move(b));
    }
    j["wavelengths"] = std::move(bands);
    return j.dump(1) + "\n";
}

MogModel mog_model_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("model file is not valid JSON: ") + e.what());
    }
    try {
        if (j.value("model_kind", std::string{}) != "mog") throw ParseError("model file is not a mog model");
        if (j.at("version").get<int>() != 1) throw ParseError("unsupported model file version");
        MogModel model;
        model.source_k = j.at("k").get<std::size_t>();
        model.levels = j.at("L").get<std::size_t>();
        const auto bands = j.at("N").get<std::size_t>();
        model.wavelet = wavelet_from_string(j.at("wavelet").get<std::string>());
        model.grid = j.at("grid").get<std::vector<double>>();
        model.warnings = j.at("warnings").get<std::vector<std::string>>();
        const auto& arr = j.at("wavelengths");
        if (!arr.is_array() || arr.size() != bands) throw ParseError("model file: wavelengths array does not have N entries");
        for (const auto& b : arr) {
            MogChainParams p;
            p.levels = model.levels;
            const auto init = b.at("initial_probs").get<std::vector<double>>();
            if (init.size() != 2) throw ParseError("MOG initial_probs must have 2 entries");
            p.initial_probs = {init[0], init[1]};
            for (const auto& t : b.at("transitions")) {
                RealMatrix m(2, 2);
                for (std::size_t r = 0; r < 2; ++r)
                    for (std::size_t c = 0; c < 2; ++c) m(r, c) = t.at(r).at(c).get<double>();
                p.transitions.push_back(m);
            }
            p.small_variance = b.at("small_variance").get<std::vector<double>>();
            p.large_weights = b.at("large_weights").get<std::vector<std::vector<double>>>();
            p.large_variances = b.at("large_variances").get<std::vector<std::vector<double>>>();
            p.validate(1e-9);
            model.per_wavelength.push_back(std::move(p));
        }
        return model;
    } catch (const json::exception& e) {
        throw ParseError(std::string("model file: ") + e.what());
    }
}

std::string model_kind_of(const std::string& text) {
    try {
        const auto j = json::parse(text);
        return j.value("model_kind", std::string{});
    } catch (const json::exception& e) {
        throw ParseError(std::string("model file is not valid JSON: ") + e.what());
    }
}

}  // namespace specnhmc
