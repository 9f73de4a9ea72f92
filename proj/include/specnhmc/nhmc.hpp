#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "specnhmc/matrix.hpp"
#include "specnhmc/wavelet.hpp"

namespace specnhmc {

/// Parameters of one non-homogeneous hidden Markov chain over the L scales of
/// a single wavelength. Scales are 0-based here, 0 = coarsest.
///
/// transitions[t] links scale t to scale t+1 and is column-stochastic:
/// transitions[t](j, i) = P(S_{t+1} = j | S_t = i).
/// variances(s, i) is the variance of the zero-mean Gaussian for state i at scale s.
struct ChainParams {
    std::size_t k = 0;
    std::size_t levels = 0;
    std::vector<double> initial_probs;
    std::vector<RealMatrix> transitions;
    RealMatrix variances;

    /// Throws ValidationError when a distribution does not sum to 1 within
    /// `tol`, or a variance is not strictly positive.
    void validate(double tol = 1e-9) const;

    /// State marginals P(S_s = i) at every scale, propagated from the
    /// initial probabilities through the transition matrices. Row s = scale s.
    RealMatrix state_marginals() const;

    bool operator==(const ChainParams&) const = default;
};

/// log N(w; 0, variance)
double log_normal_pdf(double w, double variance);

struct Posteriors {
    RealMatrix gamma;             // L x k, P(S_s = i | w)
    std::vector<RealMatrix> xi;   // L-1 slices, xi[t](i, j) = P(S_t = i, S_{t+1} = j | w)
    double log_likelihood = 0.0;  // log p(w | params)
};

/// Scaled forward-backward pass over one coefficient chain.
Posteriors forward_backward(std::span<const double> chain, const ChainParams& params);

/// log p(w | params) from the forward pass alone.
double chain_log_likelihood(std::span<const double> chain, const ChainParams& params);

struct EmConfig {
    std::size_t max_iter = 200;
    double tol = 1e-6;
    std::uint64_t seed = 0;
    /// Start from randomly drawn parameters instead of the quantile initialization.
    bool random_init = false;
    /// Relabel states at every scale by ascending variance after training.
    bool order_states = true;
};

struct EmResult {
    ChainParams params;
    /// Total log-likelihood of the training chains before each M step; the
    /// last entry belongs to the returned parameters.
    std::vector<double> log_likelihoods;
    std::size_t iterations = 0;
    bool converged = false;
    std::vector<std::string> warnings;
};

/// Deterministic start: per scale the |w| quantile groups give the variances,
/// uniform initial probabilities, 0.8 on the transition diagonal.
ChainParams initial_params(const std::vector<std::vector<double>>& chains, std::size_t k);

/// Per-scale variance floor: 1e-8 * mean(w^2), never below 1e-20.
std::vector<double> variance_floors(const std::vector<std::vector<double>>& chains);

/// Baum-Welch for zero-mean Gaussian emissions. `chains` holds M sequences of
/// equal length L (the same offset across M training spectra).
EmResult em_train(const std::vector<std::vector<double>>& chains, std::size_t k, const EmConfig& config = {});

/// Same, starting from caller-supplied parameters.
EmResult em_train_from(const std::vector<std::vector<double>>& chains, ChainParams start, const EmConfig& config = {});

/// Permutes states at every scale so variances ascend; the likelihood of any
/// chain is unchanged.
ChainParams order_states_by_variance(const ChainParams& params);

/// Draws random valid parameters (used for random EM starts and tests).
ChainParams random_params(std::size_t k, std::size_t levels, std::uint64_t seed);

struct ChainSample {
    std::vector<int> states;
    std::vector<double> coeffs;
};

ChainSample sample_chain(const ChainParams& params, std::uint64_t seed);

/// One chain per wavelength of a training grid.
struct NhmcModel {
    std::vector<ChainParams> per_wavelength;
    std::vector<double> grid;
    Wavelet wavelet = Wavelet::haar;
    std::size_t levels = 0;
    std::size_t k = 0;
    std::vector<std::size_t> iterations;
    double total_log_likelihood = 0.0;
    std::vector<std::string> warnings;

    std::size_t bands() const { return per_wavelength.size(); }
    bool operator==(const NhmcModel&) const = default;
};

struct TrainConfig {
    EmConfig em;
    std::size_t workers = 1;
};

/// Trains one chain per band of `coeffs` (one CoeffMatrix per training
/// spectrum). Results do not depend on the worker count.
NhmcModel train_model(const std::vector<CoeffMatrix>& coeffs, std::size_t k, const TrainConfig& config = {});

/// JSON model file (model_kind "gmm").
std::string model_to_json(const NhmcModel& model);
NhmcModel model_from_json(const std::string& text);

}  // namespace specnhmc
