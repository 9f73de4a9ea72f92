#pragma once

#include <span>
#include <string>

namespace specnhmc {

enum class SpectralMetric { sam, ed, scm, sid };

std::string to_string(SpectralMetric m);
SpectralMetric spectral_metric_from_string(const std::string& name);

/// Spectral angle in [0, pi].
double spectral_angle(std::span<const double> a, std::span<const double> b);
/// Euclidean distance.
double euclidean_distance(std::span<const double> a, std::span<const double> b);
/// Pearson correlation in [-1, 1].
double spectral_correlation(std::span<const double> a, std::span<const double> b);
/// Symmetric relative entropy D(p||q) + D(q||p) of the band-normalized
/// spectra, natural log. Every entry gets +1e-12 * max(entry) before
/// normalization.
double spectral_information_divergence(std::span<const double> a, std::span<const double> b);

double spectral_distance(std::span<const double> a, std::span<const double> b, SpectralMetric metric);

}  // namespace specnhmc
