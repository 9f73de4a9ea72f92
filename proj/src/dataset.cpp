#include "specnhmc/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "specnhmc/error.hpp"
#include "text_util.hpp"

namespace specnhmc {

void Spectrum::validate() const {
    if (wavelengths.size() != reflectance.size()) {
        throw ValidationError("spectrum '" + sample_id + "': " + std::to_string(reflectance.size()) +
                              " reflectance values for " + std::to_string(wavelengths.size()) + " wavelengths");
    }
    for (std::size_t i = 1; i < wavelengths.size(); ++i) {
        if (!(wavelengths[i] > wavelengths[i - 1])) {
            throw ValidationError("spectrum '" + sample_id + "': wavelengths not strictly increasing at band " +
                                  std::to_string(i));
        }
    }
    for (std::size_t i = 0; i < reflectance.size(); ++i) {
        if (!std::isfinite(reflectance[i]) || reflectance[i] < 0.0) {
            throw ValidationError("spectrum '" + sample_id + "': reflectance at band " + std::to_string(i) +
                                  " is negative or not finite");
        }
    }
}

std::map<int, std::size_t> SpectralLibrary::class_histogram() const {
    std::map<int, std::size_t> hist;
    for (const auto& [id, name] : class_names) hist[id] = 0;
    for (const auto& s : spectra) ++hist[s.class_id];
    return hist;
}

void SpectralLibrary::validate() const {
    for (std::size_t i = 1; i < grid.size(); ++i) {
        if (!(grid[i] > grid[i - 1])) throw ValidationError("library grid not strictly increasing");
    }
    for (const auto& s : spectra) {
        s.validate();
        if (s.wavelengths != grid) throw ValidationError("spectrum '" + s.sample_id + "' is not on the library grid");
        if (!class_names.count(s.class_id)) {
            throw ValidationError("spectrum '" + s.sample_id + "' has undeclared class id " +
                                  std::to_string(s.class_id));
        }
    }
    for (const auto& [id, count] : class_histogram()) {
        if (count == 0) throw ValidationError("class '" + class_names.at(id) + "' has no spectra");
    }
}

// ---------------------------------------------------------------------------

SpectralLibrary parse_library(const std::string& text, const std::optional<std::vector<std::string>>& declared) {
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (!detail::trim(line).empty()) {
            header = detail::split_csv(line);
            break;
        }
    }
    if (header.empty()) throw ParseError("no spectra: empty library file");
    if (header.size() < 3 || header[0] != "sample_id" || header[1] != "class") {
        throw ParseError("library header must start with 'sample_id,class' followed by wavelengths");
    }

    SpectralLibrary lib;
    for (std::size_t c = 2; c < header.size(); ++c) {
        lib.grid.push_back(detail::parse_double(header[c], "header wavelength column " + std::to_string(c + 1)));
    }
    for (std::size_t i = 1; i < lib.grid.size(); ++i) {
        if (!(lib.grid[i] > lib.grid[i - 1])) {
            throw ValidationError("header wavelengths not strictly increasing at column " + std::to_string(i + 3));
        }
    }

    std::map<std::string, int> ids;
    if (declared) {
        for (std::size_t i = 0; i < declared->size(); ++i) {
            ids[(*declared)[i]] = static_cast<int>(i);
            lib.class_names[static_cast<int>(i)] = (*declared)[i];
        }
    }

    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        auto fields = detail::split_csv(line);
        const std::string sample_id = fields.empty() ? std::string{} : fields[0];
        if (fields.size() != header.size()) {
            throw ParseError("row " + std::to_string(line_no) + " (sample '" + sample_id + "'): expected " +
                             std::to_string(header.size() - 2) + " band values, found " +
                             std::to_string(fields.size() < 2 ? 0 : fields.size() - 2));
        }
        const std::string& cls = fields[1];
        auto it = ids.find(cls);
        if (it == ids.end()) {
            if (declared) throw ValidationError("sample '" + sample_id + "': unknown class '" + cls + "'");
            const int id = static_cast<int>(ids.size());
            it = ids.emplace(cls, id).first;
            lib.class_names[id] = cls;
        }
        Spectrum s;
        s.sample_id = sample_id;
        s.class_id = it->second;
        s.wavelengths = lib.grid;
        s.reflectance.reserve(lib.grid.size());
        for (std::size_t c = 2; c < fields.size(); ++c) {
            s.reflectance.push_back(
                detail::parse_double(fields[c], "row " + std::to_string(line_no) + " (sample '" + sample_id + "')"));
        }
        lib.spectra.push_back(std::move(s));
    }
    if (lib.spectra.empty()) throw ParseError("no spectra: library file has a header but no rows");
    lib.validate();
    return lib;
}

SpectralLibrary load_library(const std::string& path, const std::optional<std::vector<std::string>>& declared) {
    return parse_library(detail::read_file(path), declared);
}

std::string format_library(const SpectralLibrary& lib) {
    std::string out = "sample_id,class";
    char buf[64];
    for (double w : lib.grid) {
        std::snprintf(buf, sizeof buf, ",%.6f", w);
        out += buf;
    }
    out += '\n';
    std::vector<std::size_t> order(lib.spectra.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& sa = lib.spectra[a];
        const auto& sb = lib.spectra[b];
        if (sa.class_id != sb.class_id) return sa.class_id < sb.class_id;
        return sa.sample_id < sb.sample_id;
    });
    for (std::size_t idx : order) {
        const auto& s = lib.spectra[idx];
        if (s.sample_id.find(',') != std::string::npos) {
            throw ValidationError("sample id '" + s.sample_id + "' contains a comma");
        }
        out += s.sample_id;
        out += ',';
        out += lib.class_names.at(s.class_id);
        for (double r : s.reflectance) {
            out += ',';
            out += detail::format_double(r);
        }
        out += '\n';
    }
    return out;
}

void save_library(const SpectralLibrary& lib, const std::string& path) {
    detail::write_file(path, format_library(lib));
}

// ---------------------------------------------------------------------------

std::vector<double> uniform_grid(double lo, double hi, double step) {
    if (!(step > 0.0)) throw DomainError("grid step must be positive");
    if (!(hi >= lo)) throw DomainError("grid upper bound below lower bound");
    const auto count = static_cast<std::size_t>(std::llround((hi - lo) / step)) + 1;
    std::vector<double> grid(count);
    // Snap to the micrometre-6-decimal lattice so the grid survives a CSV round trip.
    for (std::size_t i = 0; i < count; ++i) {
        grid[i] = std::round((lo + static_cast<double>(i) * step) * 1e6) / 1e6;
    }
    return grid;
}

namespace {

double interpolate(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
    if (x <= xs.front()) return ys.front();
    if (x >= xs.back()) return ys.back();
    auto it = std::lower_bound(xs.begin(), xs.end(), x);
    const auto j = static_cast<std::size_t>(it - xs.begin());
    if (xs[j] == x) return ys[j];
    const double t = (x - xs[j - 1]) / (xs[j] - xs[j - 1]);
    return ys[j - 1] + t * (ys[j] - ys[j - 1]);
}

}  // namespace

PreprocessResult preprocess(const SpectralLibrary& lib, const PreprocessOptions& opts) {
    constexpr double kCoverTol = 1e-9;
    PreprocessResult result;
    result.library.grid = uniform_grid(opts.lo_um, opts.hi_um, opts.step_um);
    const auto& grid = result.library.grid;

    for (const auto& s : lib.spectra) {
        if (s.wavelengths.empty() || s.wavelengths.front() > opts.lo_um + kCoverTol ||
            s.wavelengths.back() < opts.hi_um - kCoverTol) {
            result.rejected.push_back(s.sample_id + ": does not cover the requested wavelength range");
            continue;
        }
        Spectrum out;
        out.sample_id = s.sample_id;
        out.class_id = s.class_id;
        out.wavelengths = grid;
        out.reflectance.resize(grid.size());
        for (std::size_t i = 0; i < grid.size(); ++i) out.reflectance[i] = interpolate(s.wavelengths, s.reflectance, grid[i]);
        const double peak = *std::max_element(out.reflectance.begin(), out.reflectance.end());
        if (!(peak > 0.0)) throw DomainError("spectrum '" + s.sample_id + "' is all zero; cannot normalize by its maximum");
        for (double& r : out.reflectance) r /= peak;
        result.library.spectra.push_back(std::move(out));
    }

    const auto present = [&] {
        std::map<int, std::size_t> h;
        for (const auto& s : result.library.spectra) ++h[s.class_id];
        return h;
    }();
    for (const auto& [id, name] : lib.class_names) {
        if (present.count(id)) {
            result.library.class_names[id] = name;
        } else {
            result.rejected.push_back("class '" + name + "': every spectrum rejected; class dropped");
        }
    }
    return result;
}

// ---------------------------------------------------------------------------

BalanceResult balance_classes(const SpectralLibrary& lib, std::size_t target, std::uint64_t seed) {
    std::map<int, std::vector<std::size_t>> members;
    for (const auto& [id, name] : lib.class_names) members[id];
    for (std::size_t i = 0; i < lib.spectra.size(); ++i) members[lib.spectra[i].class_id].push_back(i);

    for (const auto& [id, idx] : members) {
        if (idx.size() < 2) {
            throw DomainError("class '" + lib.class_names.at(id) + "' has fewer than 2 spectra; cannot synthesize mixtures");
        }
        if (idx.size() > target) {
            throw DomainError("class '" + lib.class_names.at(id) + "' has " + std::to_string(idx.size()) +
                              " spectra, more than the target " + std::to_string(target));
        }
    }

    BalanceResult result;
    result.library = lib;
    result.mixing_note =
        "class balancing uses convex linear mixing of 2-3 same-class spectra with flat Dirichlet weights "
        "(substitute for Hapke radiative-transfer mixing)";

    std::mt19937_64 rng(seed);
    std::exponential_distribution<double> expo(1.0);
    for (const auto& [id, idx] : members) {
        const std::string& name = lib.class_names.at(id);
        std::vector<std::size_t> pool = idx;
        for (std::size_t n = idx.size(), made = 0; n < target; ++n, ++made) {
            const std::size_t parents = pool.size() >= 3 ? 2 + std::uniform_int_distribution<std::size_t>(0, 1)(rng) : 2;
            for (std::size_t p = 0; p < parents; ++p) {
                std::uniform_int_distribution<std::size_t> pick(p, pool.size() - 1);
                std::swap(pool[p], pool[pick(rng)]);
            }
            std::vector<double> w(parents);
            for (double& x : w) x = expo(rng);
            const double total = std::accumulate(w.begin(), w.end(), 0.0);
            for (double& x : w) x /= total;

            Spectrum mix;
            mix.class_id = id;
            mix.wavelengths = lib.grid;
            mix.reflectance.assign(lib.grid.size(), 0.0);
            char suffix[32];
            std::snprintf(suffix, sizeof suffix, "__mix%04zu", made);
            mix.sample_id = name + suffix;
            for (std::size_t p = 0; p < parents; ++p) {
                const auto& parent = lib.spectra[pool[p]].reflectance;
                for (std::size_t b = 0; b < parent.size(); ++b) mix.reflectance[b] += w[p] * parent[b];
            }
            result.library.spectra.push_back(std::move(mix));
            ++result.synthesized;
        }
    }
    return result;
}

// ---------------------------------------------------------------------------

namespace {

double center_weight(double variance) {
    const double e = std::exp(-1.0 / (2.0 * variance));
    return 1.0 / (1.0 + 4.0 * e + 4.0 * e * e);
}

}  // namespace

BlurKernel dmp_to_kernel(double dmp) {
    if (!(dmp > 1.0 / 9.0 && dmp <= 1.0)) {
        throw DomainError("DMP must lie in (1/9, 1]; got " + detail::format_double(dmp));
    }
    BlurKernel k;
    k.dmp = dmp;
    if (dmp == 1.0) {
        k.weights[1][1] = 1.0;
        return k;
    }
    // center_weight decreases monotonically in the variance.
    double lo = 1e-6;
    double hi = 1e3;
    while (center_weight(hi) > dmp && hi < 1e15) hi *= 2.0;
    double mid = 0.5 * (lo + hi);
    for (int it = 0; it < 500; ++it) {
        mid = 0.5 * (lo + hi);
        const double c = center_weight(mid);
        if (std::abs(c - dmp) <= 1e-9) break;
        if (c > dmp) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    k.variance = mid;
    const double e = std::exp(-1.0 / (2.0 * mid));
    const double raw[3][3] = {{e * e, e, e * e}, {e, 1.0, e}, {e * e, e, e * e}};
    double total = 0.0;
    for (const auto& r : raw)
        for (double v : r) total += v;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) k.weights[r][c] = raw[r][c] / total;
    return k;
}

std::pair<std::size_t, std::size_t> blur_grid_shape(std::size_t count) {
    if (count == 0) return {0, 0};
    auto rows = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(count))));
    while (rows * rows < count) ++rows;
    while (rows > 1 && (rows - 1) * (rows - 1) >= count) --rows;
    const std::size_t cols = (count + rows - 1) / rows;
    return {rows, cols};
}

BlurResult blur_library(const SpectralLibrary& lib, double dmp, std::uint64_t seed) {
    BlurResult result;
    result.kernel = dmp_to_kernel(dmp);
    const std::size_t m = lib.spectra.size();
    if (m == 0) {
        result.library = lib;
        return result;
    }
    auto& layout = result.layout;
    std::tie(layout.rows, layout.cols) = blur_grid_shape(m);
    const std::size_t cells = layout.rows * layout.cols;

    std::mt19937_64 rng(seed);
    std::vector<std::size_t> perm(m);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    layout.cell_source.resize(cells);
    layout.cell_of.resize(m);
    for (std::size_t c = 0; c < m; ++c) {
        layout.cell_source[c] = perm[c];
        layout.cell_of[perm[c]] = c;
    }
    std::uniform_int_distribution<std::size_t> pad(0, m - 1);
    for (std::size_t c = m; c < cells; ++c) layout.cell_source[c] = pad(rng);

    result.library = lib;
    const std::size_t rows = layout.rows;
    const std::size_t cols = layout.cols;
    const std::size_t bands = lib.grid.size();
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t cell = layout.cell_of[i];
        const std::size_t r = cell / cols;
        const std::size_t c = cell % cols;
        auto& out = result.library.spectra[i].reflectance;
        std::fill(out.begin(), out.end(), 0.0);
        for (int dr = -1; dr <= 1; ++dr) {
            for (int dc = -1; dc <= 1; ++dc) {
                const std::size_t rr = (r + rows + static_cast<std::size_t>(dr + 1) - 1) % rows;
                const std::size_t cc = (c + cols + static_cast<std::size_t>(dc + 1) - 1) % cols;
                const double w = result.kernel.weights[dr + 1][dc + 1];
                const auto& src = lib.spectra[layout.cell_source[rr * cols + cc]].reflectance;
                for (std::size_t b = 0; b < bands; ++b) out[b] += w * src[b];
            }
        }
    }
    return result;
}

// ---------------------------------------------------------------------------

std::pair<SpectralLibrary, SpectralLibrary> split_train_test(const SpectralLibrary& lib, std::size_t train_per_class,
                                                              std::size_t test_per_class, std::uint64_t seed) {
    std::map<int, std::vector<std::size_t>> members;
    for (const auto& [id, name] : lib.class_names) members[id];
    for (std::size_t i = 0; i < lib.spectra.size(); ++i) members[lib.spectra[i].class_id].push_back(i);

    std::mt19937_64 rng(seed);
    std::vector<std::size_t> train_idx;
    std::vector<std::size_t> test_idx;
    for (auto& [id, idx] : members) {
        if (idx.size() < train_per_class + test_per_class) {
            throw DomainError("class '" + lib.class_names.at(id) + "' has " + std::to_string(idx.size()) +
                              " spectra; split needs " + std::to_string(train_per_class + test_per_class));
        }
        std::shuffle(idx.begin(), idx.end(), rng);
        train_idx.insert(train_idx.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(train_per_class));
        test_idx.insert(test_idx.end(), idx.begin() + static_cast<std::ptrdiff_t>(train_per_class),
                        idx.begin() + static_cast<std::ptrdiff_t>(train_per_class + test_per_class));
    }
    auto build = [&](std::vector<std::size_t> idx) {
        std::sort(idx.begin(), idx.end());
        SpectralLibrary out;
        out.grid = lib.grid;
        out.class_names = lib.class_names;
        for (std::size_t i : idx) out.spectra.push_back(lib.spectra[i]);
        return out;
    };
    return {build(std::move(train_idx)), build(std::move(test_idx))};
}

// ---------------------------------------------------------------------------

SyntheticLibrary synthesize_library(const SyntheticOptions& opts, std::uint64_t seed) {
    if (opts.dip_centers_um.empty()) throw DomainError("synthetic library needs at least one class");
    if (opts.min_per_class < 2 || opts.max_per_class < opts.min_per_class) {
        throw DomainError("synthetic class sizes must satisfy 2 <= min <= max");
    }
    if (opts.offset_max < opts.offset_min || opts.slope_max < opts.slope_min) {
        throw DomainError("synthetic continuum ranges must satisfy min <= max");
    }
    SyntheticLibrary out;
    auto& lib = out.library;
    lib.grid = uniform_grid(opts.lo_um, opts.hi_um, opts.step_um);

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 1.0);
    auto between = [&](double a, double b) { return a + (b - a) * unit(rng); };

    for (std::size_t c = 0; c < opts.dip_centers_um.size(); ++c) {
        const int id = static_cast<int>(c);
        char name[64];
        std::snprintf(name, sizeof name, "dip%.2fum", opts.dip_centers_um[c]);
        lib.class_names[id] = name;
        const auto count = std::uniform_int_distribution<std::size_t>(opts.min_per_class, opts.max_per_class)(rng);
        for (std::size_t j = 0; j < count; ++j) {
            SyntheticDip dip;
            dip.class_id = id;
            dip.center_um = opts.dip_centers_um[c] + between(-opts.center_jitter_um, opts.center_jitter_um);
            dip.sigma_um = between(opts.width_min_um, opts.width_max_um);
            dip.depth = between(opts.depth_min, opts.depth_max);
            const double offset = between(opts.offset_min, opts.offset_max);
            const double slope = between(opts.slope_min, opts.slope_max);

            Spectrum s;
            char sid[64];
            std::snprintf(sid, sizeof sid, "%s_%03zu", name, j);
            s.sample_id = sid;
            dip.sample_id = sid;
            s.class_id = id;
            s.wavelengths = lib.grid;
            s.reflectance.resize(lib.grid.size());
            const double span = opts.hi_um - opts.lo_um;
            for (std::size_t b = 0; b < lib.grid.size(); ++b) {
                const double x = lib.grid[b];
                const double continuum = offset + slope * (x - opts.lo_um) / span;
                const double z = (x - dip.center_um) / dip.sigma_um;
                double r = continuum * (1.0 - dip.depth * std::exp(-0.5 * z * z));
                if (opts.noise_sigma > 0.0) r += opts.noise_sigma * noise(rng);
                s.reflectance[b] = std::max(r, 0.0);
            }
            lib.spectra.push_back(std::move(s));
            out.dips.push_back(std::move(dip));
        }
    }
    return out;
}

}  // namespace specnhmc
