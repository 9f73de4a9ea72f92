#include "specnhmc/semantics.hpp"

#include <cstdlib>

#include "json.hpp"
#include "specnhmc/error.hpp"
#include "text_util.hpp"

namespace specnhmc {

std::string to_string(SlopeTag tag) {
    switch (tag) {
        case SlopeTag::flat:
            return "flat";
        case SlopeTag::decreasing:
            return "decreasing";
        case SlopeTag::increasing:
            return "increasing";
    }
    return "flat";
}

std::vector<int> label_mean_vector(const LabelArray& labels) {
    if (!labels.is_signed) throw ValidationError("label mean vector needs sign-augmented labels");
    const std::size_t levels = labels.levels();
    if (levels == 0) throw ValidationError("label array has no scales");
    std::vector<int> out(labels.bands());
    for (std::size_t n = 0; n < labels.bands(); ++n) {
        long sum = 0;
        for (std::size_t s = 0; s < levels; ++s) {
            const int v = labels.labels(s, n);
            if (v < -1 || v > 1) throw ValidationError("label mean vector needs binary signed labels in {-1, 0, +1}");
            sum += v;
        }
        // round(sum / L) half away from zero, in integers.
        if (2 * static_cast<std::size_t>(std::labs(sum)) >= levels) out[n] = sum > 0 ? 1 : -1;
    }
    return out;
}

std::vector<double> absorption_bands(const std::vector<int>& mean_vector, const std::vector<double>& grid) {
    if (mean_vector.size() != grid.size()) throw DimensionError("mean vector and grid lengths differ");
    std::vector<double> bands;
    long last_plus = -1;
    for (std::size_t i = 0; i < mean_vector.size(); ++i) {
        const int v = mean_vector[i];
        if (v == 1) {
            last_plus = static_cast<long>(i);
        } else if (v == -1) {
            if (last_plus >= 0) bands.push_back(0.5 * (grid[static_cast<std::size_t>(last_plus)] + grid[i]));
            last_plus = -1;
        } else if (v != 0) {
            throw ValidationError("mean vector entries must be -1, 0 or +1");
        }
    }
    return bands;
}

std::vector<SlopeTag> slope_tags(const std::vector<int>& mean_vector) {
    std::vector<SlopeTag> tags(mean_vector.size(), SlopeTag::flat);
    for (std::size_t i = 0; i < mean_vector.size(); ++i) {
        if (mean_vector[i] > 0) tags[i] = SlopeTag::decreasing;
        if (mean_vector[i] < 0) tags[i] = SlopeTag::increasing;
    }
    return tags;
}

SemanticSummary summarize(const LabelArray& labels, const std::vector<double>& grid) {
    SemanticSummary s;
    s.mean_vector = label_mean_vector(labels);
    s.band_locations = absorption_bands(s.mean_vector, grid);
    s.coloring = slope_tags(s.mean_vector);
    return s;
}

std::set<std::size_t> default_lcp_scales(std::size_t levels) {
    std::set<std::size_t> out;
    for (std::size_t s = levels >= 4 ? levels - 3 : 1; s <= levels; ++s) out.insert(s);
    return out;
}

std::vector<double> rivard_lcp(const CoeffMatrix& coeffs, const std::set<std::size_t>& scales) {
    if (scales.empty()) throw ValidationError("LCP scale set is empty");
    for (std::size_t s : scales) {
        if (s < 1 || s > coeffs.levels()) {
            throw ValidationError("LCP scale " + std::to_string(s) + " outside 1.." + std::to_string(coeffs.levels()));
        }
    }
    std::vector<double> out(coeffs.bands(), 0.0);
    for (std::size_t s : scales)
        for (std::size_t n = 0; n < coeffs.bands(); ++n) out[n] += coeffs.values(s - 1, n);
    return out;
}

std::string summary_to_json(const SemanticSummary& summary, const std::string& sample_id) {
    nlohmann::json j;
    j["sample_id"] = sample_id;
    j["mean_vector"] = summary.mean_vector;
    j["band_locations_um"] = summary.band_locations;
    j["band_pairing"] = "bridged_zeros";
    return j.dump(1) + "\n";
}

std::string format_colored_segments(const SemanticSummary& summary, const Spectrum& spectrum) {
    if (summary.coloring.size() != spectrum.reflectance.size()) {
        throw DimensionError("summary and spectrum lengths differ");
    }
    std::string out = "wavelength_um,reflectance,tag,color\n";
    for (std::size_t i = 0; i < summary.coloring.size(); ++i) {
        const SlopeTag t = summary.coloring[i];
        const char* color = t == SlopeTag::flat ? "green" : (t == SlopeTag::decreasing ? "red" : "blue");
        out += detail::format_double(spectrum.wavelengths[i]) + ',' + detail::format_double(spectrum.reflectance[i]) + ',' +
               to_string(t) + ',' + color + '\n';
    }
    return out;
}

}  // namespace specnhmc
