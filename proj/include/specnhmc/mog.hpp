#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "specnhmc/labeling.hpp"
#include "specnhmc/matrix.hpp"
#include "specnhmc/nhmc.hpp"

namespace specnhmc {

// Binary "mixture of Gaussians" chain obtained from a k-state GMM chain by
// merging states 1..k-1 into one "large" state: Z = 0 iff S = 0.

/// Parameters of one collapsed chain. Scales are 0-based, coarse to fine.
struct MogChainParams {
    std::size_t levels = 0;
    std::array<double, 2> initial_probs{};
    /// transitions[t](b, a) = P(Z_{t+1} = b | Z_t = a), 2 x 2, column-stochastic.
    std::vector<RealMatrix> transitions;
    /// Variance of the small state per scale.
    std::vector<double> small_variance;
    /// Per scale: normalized weights and variances of the k-1 large components.
    std::vector<std::vector<double>> large_weights;
    std::vector<std::vector<double>> large_variances;

    void validate(double tol = 1e-12) const;
    bool operator==(const MogChainParams&) const = default;
};

/// (p_0, 1 - p_0). Throws ValidationError unless `probs` is a distribution.
std::array<double, 2> collapse_state_probs(std::span<const double> probs);

/// 2 x 2 column-stochastic matrix of the collapsed chain between scales
/// s-1 and s, from the k x k matrix `trans` (trans(j, i) = P(j | i)) and the
/// parent-scale marginals. Throws DegenerateMassError when the parent large
/// states carry no probability.
RealMatrix collapse_transitions(const RealMatrix& trans, std::span<const double> parent_probs);

/// p(w | Z = which) at scale `scale` (0-based).
double mog_conditional_pdf(double w, std::size_t scale, int which, const MogChainParams& params);
double mog_log_conditional_pdf(double w, std::size_t scale, int which, const MogChainParams& params);

struct MogCollapse {
    MogChainParams params;
    std::vector<std::string> warnings;
};

/// Collapses one chain, propagating marginals P_s = A_s P_{s-1}. Degenerate
/// large-state mass gives a uniform column / equal mixture weights plus a warning.
MogCollapse collapse_chain(const ChainParams& params);

struct MogModel {
    std::vector<MogChainParams> per_wavelength;
    std::vector<double> grid;
    Wavelet wavelet = Wavelet::haar;
    std::size_t levels = 0;
    std::size_t source_k = 0;
    std::vector<std::string> warnings;

    std::size_t bands() const { return per_wavelength.size(); }
    bool operator==(const MogModel&) const = default;
};

MogModel collapse_model(const NhmcModel& model);

/// Binary Viterbi with mixture emissions; lower index wins ties.
ViterbiPath viterbi_mog(std::span<const double> chain, const MogChainParams& params);

/// log p(w | collapsed chain) by a forward pass.
double mog_chain_log_likelihood(std::span<const double> chain, const MogChainParams& params);

LabelArray label_coeffs_mog(const CoeffMatrix& coeffs, const MogModel& model);
LabelArray label_spectrum_mog(const Spectrum& spectrum, const MogModel& model);

/// Same JSON layout as the GMM model file, tagged model_kind "mog".
std::string mog_model_to_json(const MogModel& model);
MogModel mog_model_from_json(const std::string& text);

/// Reads the model_kind tag of a model file ("gmm" or "mog").
std::string model_kind_of(const std::string& json_text);

}  // namespace specnhmc
