#pragma once

#include <span>
#include <string>
#include <vector>

#include "specnhmc/dataset.hpp"
#include "specnhmc/matrix.hpp"
#include "specnhmc/nhmc.hpp"
#include "specnhmc/wavelet.hpp"

namespace specnhmc {

struct ViterbiPath {
    std::vector<int> states;
    /// log p(best path, w | params)
    double log_joint = 0.0;
};

/// Generic log-domain Viterbi.
///   log_initial[i]          log P(S_0 = i)
///   log_transitions[t](j,i) log P(S_{t+1} = j | S_t = i)
///   log_emissions(s, i)     log p(w_s | S_s = i)
/// Ties go to the lower state index, both in the recursion and at the end.
ViterbiPath viterbi_log(std::span<const double> log_initial, const std::vector<RealMatrix>& log_transitions,
                        const RealMatrix& log_emissions);

/// Most probable state path of one coefficient chain under a GMM chain.
ViterbiPath viterbi_gmm(std::span<const double> chain, const ChainParams& params);

/// Hidden-state labels of one spectrum: L x N.
struct LabelArray {
    LabelMatrix labels;
    bool is_signed = false;
    /// log p(w_n | params) of every band's coefficient chain.
    std::vector<double> log_likelihoods;

    std::size_t levels() const { return labels.rows(); }
    std::size_t bands() const { return labels.cols(); }

    /// Row-major (scale-major) feature vector.
    std::vector<double> flatten() const;

    bool operator==(const LabelArray&) const = default;
};

/// Throws ValidationError unless the spectrum lies on `grid` (within 1e-9 um).
void check_on_grid(const Spectrum& spectrum, const std::vector<double>& grid);

/// UWT with the model's wavelet, then Viterbi per band.
LabelArray label_spectrum(const Spectrum& spectrum, const NhmcModel& model);
LabelArray label_coeffs(const CoeffMatrix& coeffs, const NhmcModel& model);

/// signed(s, n) = sign(w(s, n)) * labels(s, n), sign(0) = +1.
LabelArray add_signs(const LabelArray& labels, const CoeffMatrix& coeffs);

/// L rows x N columns of integers.
std::string format_labels_csv(const LabelArray& labels);

}  // namespace specnhmc
