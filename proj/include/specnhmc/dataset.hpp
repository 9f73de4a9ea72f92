#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace specnhmc {

/// One labeled reflectance curve. Wavelengths are band centers in micrometres.
struct Spectrum {
    std::vector<double> wavelengths;
    std::vector<double> reflectance;
    int class_id = 0;
    std::string sample_id;

    /// Throws ValidationError on a non-increasing grid, length mismatch,
    /// or a negative / non-finite reflectance.
    void validate() const;

    bool operator==(const Spectrum&) const = default;
};

/// Labeled spectra sharing one wavelength grid.
struct SpectralLibrary {
    std::vector<Spectrum> spectra;
    std::vector<double> grid;
    std::map<int, std::string> class_names;

    void validate() const;

    std::size_t size() const { return spectra.size(); }
    /// Number of spectra per declared class (declared classes with zero included).
    std::map<int, std::size_t> class_histogram() const;

    bool operator==(const SpectralLibrary&) const = default;
};

// ---------------------------------------------------------------------------
// CSV I/O
//
// Header: sample_id,class,<w1>,...,<wN> with wavelengths in micrometres
// printed with 6 decimals. One row per spectrum, class column holds the class
// name. Rows are written ordered by class_id then sample_id.

/// Reads a library. Class ids follow `declared_classes` when given (an unknown
/// name is then a ValidationError); otherwise ids are assigned in order of
/// first appearance.
SpectralLibrary load_library(const std::string& path,
                             const std::optional<std::vector<std::string>>& declared_classes = std::nullopt);
SpectralLibrary parse_library(const std::string& text,
                              const std::optional<std::vector<std::string>>& declared_classes = std::nullopt);

void save_library(const SpectralLibrary& lib, const std::string& path);
std::string format_library(const SpectralLibrary& lib);

// ---------------------------------------------------------------------------
// Preprocessing

struct PreprocessOptions {
    double lo_um = 0.35;
    double hi_um = 2.6;
    double step_um = 0.005;
};

struct PreprocessResult {
    SpectralLibrary library;
    /// sample_id + reason for every spectrum dropped because it does not cover the range.
    std::vector<std::string> rejected;
};

/// Uniform grid lo, lo+step, ..., hi.
std::vector<double> uniform_grid(double lo, double hi, double step);

/// Resamples every spectrum onto the uniform grid (linear interpolation, exact
/// at coincident nodes) and divides it by its own maximum.
PreprocessResult preprocess(const SpectralLibrary& lib, const PreprocessOptions& opts = {});

// ---------------------------------------------------------------------------
// Class balancing

struct BalanceResult {
    SpectralLibrary library;
    std::size_t synthesized = 0;
    /// Human-readable description of the mixing model actually used.
    std::string mixing_note;
};

/// Tops every class up to `target_per_class` with convex mixtures of 2-3
/// random same-class parents, weights drawn from a flat Dirichlet.
BalanceResult balance_classes(const SpectralLibrary& lib, std::size_t target_per_class, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Spatial blurring

/// 3x3 isotropic Gaussian stencil, weights[r][c] with the center at [1][1].
struct BlurKernel {
    std::array<std::array<double, 3>, 3> weights{};
    double dmp = 1.0;
    double variance = 0.0;

    double center() const { return weights[1][1]; }
};

/// Gaussian kernel whose normalized center weight equals `dmp`.
/// Requires 1/9 < dmp <= 1; dmp == 1 gives the delta kernel.
BlurKernel dmp_to_kernel(double dmp);

/// Placement of spectra on the blur grid: cell (r, c) holds library spectrum
/// cell_source[r * cols + c]. Cells past the library size are seeded repeats.
struct BlurLayout {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::size_t> cell_source;
    /// cell index of library spectrum i (first occurrence).
    std::vector<std::size_t> cell_of;
};

struct BlurResult {
    SpectralLibrary library;  // same order and labels as the input
    BlurLayout layout;
    BlurKernel kernel;
};

/// Smallest near-square grid holding `count` cells: rows = ceil(sqrt(count)),
/// cols = ceil(count / rows).
std::pair<std::size_t, std::size_t> blur_grid_shape(std::size_t count);

/// Places spectra on a toroidal grid by seeded permutation and convolves each
/// wavelength plane with dmp_to_kernel(dmp).
BlurResult blur_library(const SpectralLibrary& lib, double dmp, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Splitting

std::pair<SpectralLibrary, SpectralLibrary> split_train_test(const SpectralLibrary& lib,
                                                              std::size_t train_per_class,
                                                              std::size_t test_per_class, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Synthetic libraries

/// Parameters of generated libraries: a linear continuum with one
/// Gaussian absorption dip per class. Class c has its dip centred at
/// dip_centers_um[c]; per-sample jitter perturbs centre, depth, width and continuum.
struct SyntheticOptions {
    std::vector<double> dip_centers_um{0.62, 1.00, 1.42, 1.90, 2.30};
    std::size_t min_per_class = 20;
    std::size_t max_per_class = 40;
    double lo_um = 0.35;
    double hi_um = 2.6;
    double step_um = 0.005;
    double depth_min = 0.35;
    double depth_max = 0.6;
    double width_min_um = 0.035;  // Gaussian sigma of the dip
    double width_max_um = 0.055;
    double center_jitter_um = 0.01;
    // Linear continuum: offset at lo_um, rise over the full range. Flat by
    // default; a sloped continuum dominates the coarse scales.
    double offset_min = 0.55;
    double offset_max = 0.75;
    double slope_min = 0.0;
    double slope_max = 0.0;
    double noise_sigma = 0.0;
};

/// Ground truth of one synthetic spectrum.
struct SyntheticDip {
    std::string sample_id;
    int class_id = 0;
    double center_um = 0.0;
    double sigma_um = 0.0;
    double depth = 0.0;
};

struct SyntheticLibrary {
    SpectralLibrary library;
    std::vector<SyntheticDip> dips;  // parallel to library.spectra
};

SyntheticLibrary synthesize_library(const SyntheticOptions& opts, std::uint64_t seed);

}  // namespace specnhmc
