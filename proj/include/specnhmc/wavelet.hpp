#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "specnhmc/matrix.hpp"

namespace specnhmc {

enum class Wavelet { haar, db4 };

std::string to_string(Wavelet w);
Wavelet wavelet_from_string(const std::string& name);

/// Undecimated wavelet coefficients of one signal.
///
/// values(s, n) is the coefficient at scale row s and band n. Row 0 is the
/// coarsest scale (dilation 2^L), row L-1 the finest (dilation 2).
struct CoeffMatrix {
    RealMatrix values;
    Wavelet wavelet = Wavelet::haar;

    std::size_t levels() const { return values.rows(); }
    std::size_t bands() const { return values.cols(); }

    /// Column n as a coarse-to-fine chain.
    std::vector<double> chain(std::size_t band) const { return values.column(band); }
};

/// Support length (in samples) of the analysing wavelet on scale row `row`
/// of an L-level transform.
std::size_t haar_support(std::size_t levels, std::size_t row);

/// Index into a length-n signal under half-point symmetric extension
/// (x[-1] = x[0], x[n] = x[n-1], period 2n).
std::size_t symmetric_index(long long i, std::size_t n);

/// Undecimated transform by direct inner products at every offset.
///
/// Haar: at dilation d the analysing function at offset n is +1/sqrt(d) on
/// samples [n-d/2, n-1] and -1/sqrt(d) on [n, n+d/2-1], so a falling segment
/// gives a positive coefficient. Requires bands >= 2^(L-1) so every
/// half-support fits inside one reflection.
CoeffMatrix uwt(std::span<const double> signal, std::size_t levels, Wavelet wavelet = Wavelet::haar);

/// Unit-norm analysis filter used for db4 at a given dilation level (1 = finest).
std::vector<double> db4_filter(std::size_t level);

/// L rows x N columns, row 1 = coarsest.
std::string format_coeffs_csv(const CoeffMatrix& c);

}  // namespace specnhmc
