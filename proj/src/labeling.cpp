#include "specnhmc/labeling.hpp"

#include <cmath>
#include <limits>

#include "specnhmc/error.hpp"

namespace specnhmc {

ViterbiPath viterbi_log(std::span<const double> log_initial, const std::vector<RealMatrix>& log_transitions,
                        const RealMatrix& log_emissions) {
    const std::size_t levels = log_emissions.rows();
    const std::size_t k = log_emissions.cols();
    if (levels == 0 || k == 0) throw DimensionError("viterbi needs at least one scale and one state");
    if (log_initial.size() != k || log_transitions.size() + 1 != levels) {
        throw DimensionError("viterbi inputs disagree on state count or scale count");
    }

    RealMatrix score(levels, k);
    Matrix<int> back(levels, k, 0);
    for (std::size_t i = 0; i < k; ++i) score(0, i) = log_initial[i] + log_emissions(0, i);
    for (std::size_t s = 1; s < levels; ++s) {
        const auto& trans = log_transitions[s - 1];
        for (std::size_t i = 0; i < k; ++i) {
            double best = -std::numeric_limits<double>::infinity();
            int arg = 0;
            for (std::size_t j = 0; j < k; ++j) {
                const double cand = score(s - 1, j) + trans(i, j);
                if (cand > best) {
                    best = cand;
                    arg = static_cast<int>(j);
                }
            }
            back(s, i) = arg;
            score(s, i) = best + log_emissions(s, i);
        }
    }

    ViterbiPath path;
    path.states.resize(levels);
    double best = -std::numeric_limits<double>::infinity();
    int arg = 0;
    for (std::size_t i = 0; i < k; ++i) {
        if (score(levels - 1, i) > best) {
            best = score(levels - 1, i);
            arg = static_cast<int>(i);
        }
    }
    path.log_joint = best;
    path.states[levels - 1] = arg;
    for (std::size_t s = levels - 1; s > 0; --s) path.states[s - 1] = back(s, static_cast<std::size_t>(path.states[s]));
    return path;
}

namespace {

std::vector<double> log_of(std::span<const double> p) {
    std::vector<double> out(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) out[i] = std::log(p[i]);
    return out;
}

RealMatrix log_of(const RealMatrix& m) {
    RealMatrix out(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.size(); ++i) out.data()[i] = std::log(m.data()[i]);
    return out;
}

}  // namespace

ViterbiPath viterbi_gmm(std::span<const double> chain, const ChainParams& params) {
    if (chain.size() != params.levels) throw DimensionError("chain length differs from the model's scale count");
    RealMatrix emis(params.levels, params.k);
    for (std::size_t s = 0; s < params.levels; ++s) {
        if (!std::isfinite(chain[s])) throw ValidationError("coefficient at scale " + std::to_string(s + 1) + " is not finite");
        for (std::size_t i = 0; i < params.k; ++i) emis(s, i) = log_normal_pdf(chain[s], params.variances(s, i));
    }
    std::vector<RealMatrix> trans;
    trans.reserve(params.transitions.size());
    for (const auto& a : params.transitions) trans.push_back(log_of(a));
    return viterbi_log(log_of(params.initial_probs), trans, emis);
}

std::vector<double> LabelArray::flatten() const {
    std::vector<double> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) out[i] = labels.data()[i];
    return out;
}

void check_on_grid(const Spectrum& spectrum, const std::vector<double>& grid) {
    bool ok = spectrum.wavelengths.size() == grid.size() && spectrum.reflectance.size() == grid.size();
    for (std::size_t i = 0; ok && i < grid.size(); ++i) ok = std::abs(spectrum.wavelengths[i] - grid[i]) <= 1e-9;
    if (!ok) throw ValidationError("spectrum '" + spectrum.sample_id + "' is not on the model's wavelength grid");
}

LabelArray label_coeffs(const CoeffMatrix& coeffs, const NhmcModel& model) {
    if (coeffs.levels() != model.levels || coeffs.bands() != model.bands()) {
        throw DimensionError("coefficient matrix shape differs from the model");
    }
    LabelArray out;
    out.labels = LabelMatrix(model.levels, model.bands());
    out.log_likelihoods.resize(model.bands());
    for (std::size_t n = 0; n < model.bands(); ++n) {
        const auto chain = coeffs.chain(n);
        const auto path = viterbi_gmm(chain, model.per_wavelength[n]);
        for (std::size_t s = 0; s < model.levels; ++s) out.labels(s, n) = path.states[s];
        out.log_likelihoods[n] = chain_log_likelihood(chain, model.per_wavelength[n]);
    }
    return out;
}

LabelArray label_spectrum(const Spectrum& spectrum, const NhmcModel& model) {
    check_on_grid(spectrum, model.grid);
    return label_coeffs(uwt(spectrum.reflectance, model.levels, model.wavelet), model);
}

LabelArray add_signs(const LabelArray& labels, const CoeffMatrix& coeffs) {
    if (labels.is_signed) throw ValidationError("labels already carry signs");
    if (labels.levels() != coeffs.levels() || labels.bands() != coeffs.bands()) {
        throw DimensionError("label array and coefficient matrix differ in shape");
    }
    LabelArray out = labels;
    out.is_signed = true;
    for (std::size_t s = 0; s < labels.levels(); ++s)
        for (std::size_t n = 0; n < labels.bands(); ++n)
            if (coeffs.values(s, n) < 0.0) out.labels(s, n) = -labels.labels(s, n);
    return out;
}

std::string format_labels_csv(const LabelArray& labels) {
    std::string out;
    for (std::size_t s = 0; s < labels.levels(); ++s) {
        for (std::size_t n = 0; n < labels.bands(); ++n) {
            if (n) out += ',';
            out += std::to_string(labels.labels(s, n));
        }
        out += '\n';
    }
    return out;
}

}  // namespace specnhmc
