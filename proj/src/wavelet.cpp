#include "specnhmc/wavelet.hpp"

#include <cmath>

#include "specnhmc/error.hpp"
#include "text_util.hpp"

namespace specnhmc {

std::string to_string(Wavelet w) { return w == Wavelet::haar ? "haar" : "db4"; }

Wavelet wavelet_from_string(const std::string& name) {
    if (name == "haar") return Wavelet::haar;
    if (name == "db4") return Wavelet::db4;
    throw ValidationError("unknown wavelet '" + name + "' (expected haar or db4)");
}

std::size_t haar_support(std::size_t levels, std::size_t row) { return std::size_t{1} << (levels - row); }

std::size_t symmetric_index(long long i, std::size_t n) {
    const auto period = static_cast<long long>(2 * n);
    long long m = i % period;
    if (m < 0) m += period;
    return static_cast<std::size_t>(m < static_cast<long long>(n) ? m : period - 1 - m);
}

namespace {

// Daubechies 8-tap low-pass (four vanishing moments).
constexpr double kDb4Low[8] = {0.2303778133088964,  0.7148465705529154,  0.6308807679298587,  -0.0279837694168599,
                               -0.1870348117190931, 0.0308413818355607,  0.0328830116668852,  -0.0105974017850690};

std::vector<double> convolve(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> out(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
    return out;
}

std::vector<double> upsample(const std::vector<double>& f, std::size_t factor) {
    std::vector<double> out((f.size() - 1) * factor + 1, 0.0);
    for (std::size_t i = 0; i < f.size(); ++i) out[i * factor] = f[i];
    return out;
}

}  // namespace

std::vector<double> db4_filter(std::size_t level) {
    if (level == 0) throw DomainError("db4 filter level starts at 1");
    std::vector<double> low(std::begin(kDb4Low), std::end(kDb4Low));
    std::vector<double> high(8);
    for (std::size_t k = 0; k < 8; ++k) high[k] = (k % 2 == 0 ? 1.0 : -1.0) * kDb4Low[7 - k];
    std::vector<double> filter{1.0};
    for (std::size_t j = 1; j < level; ++j) filter = convolve(filter, upsample(low, std::size_t{1} << (j - 1)));
    filter = convolve(filter, upsample(high, std::size_t{1} << (level - 1)));
    double norm = 0.0;
    for (double v : filter) norm += v * v;
    norm = std::sqrt(norm);
    for (double& v : filter) v /= norm;
    return filter;
}

CoeffMatrix uwt(std::span<const double> signal, std::size_t levels, Wavelet wavelet) {
    const std::size_t n = signal.size();
    if (levels == 0) throw DimensionError("wavelet transform needs at least one scale");
    if (levels > 30 || n < (std::size_t{1} << (levels - 1))) {
        throw DimensionError("signal of " + std::to_string(n) + " bands is too short for " + std::to_string(levels) +
                             " scales (needs at least 2^(L-1))");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(signal[i])) throw ValidationError("signal value at band " + std::to_string(i) + " is not finite");
    }

    CoeffMatrix out;
    out.wavelet = wavelet;
    out.values = RealMatrix(levels, n);
    for (std::size_t row = 0; row < levels; ++row) {
        if (wavelet == Wavelet::haar) {
            const std::size_t d = haar_support(levels, row);
            const auto half = static_cast<long long>(d / 2);
            const double scale = 1.0 / std::sqrt(static_cast<double>(d));
            for (std::size_t pos = 0; pos < n; ++pos) {
                const auto c = static_cast<long long>(pos);
                double first = 0.0;
                double second = 0.0;
                for (long long t = 0; t < half; ++t) {
                    first += signal[symmetric_index(c - half + t, n)];
                    second += signal[symmetric_index(c + t, n)];
                }
                out.values(row, pos) = (first - second) * scale;
            }
        } else {
            const auto filter = db4_filter(levels - row);
            const auto len = static_cast<long long>(filter.size());
            const long long shift = len / 2;
            for (std::size_t pos = 0; pos < n; ++pos) {
                double acc = 0.0;
                for (long long t = 0; t < len; ++t) {
                    acc += filter[static_cast<std::size_t>(t)] *
                           signal[symmetric_index(static_cast<long long>(pos) - shift + t, n)];
                }
                out.values(row, pos) = acc;
            }
        }
    }
    return out;
}

std::string format_coeffs_csv(const CoeffMatrix& c) {
    std::string out;
    for (std::size_t r = 0; r < c.values.rows(); ++r) {
        for (std::size_t col = 0; col < c.values.cols(); ++col) {
            if (col) out += ',';
            out += detail::format_double(c.values(r, col));
        }
        out += '\n';
    }
    return out;
}

}  // namespace specnhmc
