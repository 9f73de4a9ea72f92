#pragma once

#include <set>
#include <string>
#include <vector>

#include "specnhmc/dataset.hpp"
#include "specnhmc/labeling.hpp"
#include "specnhmc/wavelet.hpp"

namespace specnhmc {

enum class SlopeTag { flat, decreasing, increasing };

std::string to_string(SlopeTag tag);

struct SemanticSummary {
    std::vector<int> mean_vector;        // per band, in {-1, 0, +1}
    std::vector<double> band_locations;  // absorption band centres (um), ascending
    std::vector<SlopeTag> coloring;      // per band
};

/// Column means of a signed binary label array, rounded half away from zero.
std::vector<int> label_mean_vector(const LabelArray& labels);

/// Midpoints between the last +1 of a run and the first -1 of the next run;
/// zeros between the two runs are bridged.
std::vector<double> absorption_bands(const std::vector<int>& mean_vector, const std::vector<double>& grid);

/// +1 -> decreasing, -1 -> increasing, 0 -> flat.
std::vector<SlopeTag> slope_tags(const std::vector<int>& mean_vector);

SemanticSummary summarize(const LabelArray& signed_mog_labels, const std::vector<double>& grid);

/// Default scale set for the LCP feature: the four finest scales (1-based L-3..L).
std::set<std::size_t> default_lcp_scales(std::size_t levels);

/// Per-band sum of coefficients over `scales` (1-based scale indices, 1 = coarsest).
std::vector<double> rivard_lcp(const CoeffMatrix& coeffs, const std::set<std::size_t>& scales);

std::string summary_to_json(const SemanticSummary& summary, const std::string& sample_id);

/// wavelength,reflectance,tag,color rows for external plotting
/// (flat = green, decreasing = red, increasing = blue).
std::string format_colored_segments(const SemanticSummary& summary, const Spectrum& spectrum);

}  // namespace specnhmc
