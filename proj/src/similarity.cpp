#include "specnhmc/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "specnhmc/error.hpp"

namespace specnhmc {

std::string to_string(SpectralMetric m) {
    switch (m) {
        case SpectralMetric::sam:
            return "sam";
        case SpectralMetric::ed:
            return "ed";
        case SpectralMetric::scm:
            return "scm";
        case SpectralMetric::sid:
            return "sid";
    }
    return "sam";
}

SpectralMetric spectral_metric_from_string(const std::string& name) {
    if (name == "sam") return SpectralMetric::sam;
    if (name == "ed") return SpectralMetric::ed;
    if (name == "scm") return SpectralMetric::scm;
    if (name == "sid") return SpectralMetric::sid;
    throw ValidationError("unknown spectral metric '" + name + "'");
}

namespace {

void check_pair(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimensionError("spectra differ in length");
    if (a.size() < 2) throw DimensionError("spectra need at least two bands");
}

}  // namespace

double spectral_angle(std::span<const double> a, std::span<const double> b) {
    check_pair(a, b);
    double na = 0.0;
    double nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) throw DomainError("spectral angle of a zero vector is undefined");
    na = std::sqrt(na);
    nb = std::sqrt(nb);
    // 2 atan2(|u - v|, |u + v|) on unit vectors; acos loses half the digits near 0.
    double diff = 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double u = a[i] / na;
        const double v = b[i] / nb;
        diff += (u - v) * (u - v);
        sum += (u + v) * (u + v);
    }
    return 2.0 * std::atan2(std::sqrt(diff), std::sqrt(sum));
}

double euclidean_distance(std::span<const double> a, std::span<const double> b) {
    check_pair(a, b);
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(acc);
}

double spectral_correlation(std::span<const double> a, std::span<const double> b) {
    check_pair(a, b);
    const auto n = static_cast<double>(a.size());
    double ma = 0.0;
    double mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double cov = 0.0;
    double va = 0.0;
    double vb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        cov += (a[i] - ma) * (b[i] - mb);
        va += (a[i] - ma) * (a[i] - ma);
        vb += (b[i] - mb) * (b[i] - mb);
    }
    const auto constant = [](std::span<const double> v) {
        return std::all_of(v.begin(), v.end(), [&](double x) { return x == v[0]; });
    };
    if (constant(a) || constant(b) || va == 0.0 || vb == 0.0) {
        throw DomainError("spectral correlation of a constant vector is undefined");
    }
    return std::clamp(cov / std::sqrt(va * vb), -1.0, 1.0);
}

double spectral_information_divergence(std::span<const double> a, std::span<const double> b) {
    check_pair(a, b);
    // Zero guard relative to each vector's peak, so scaling an input leaves
    // the value unchanged; on unit-maximum spectra it is exactly 1e-12.
    constexpr double kEps = 1e-12;
    const double ea = kEps * *std::max_element(a.begin(), a.end());
    const double eb = kEps * *std::max_element(b.begin(), b.end());
    std::vector<double> p(a.size());
    std::vector<double> q(b.size());
    double sa = 0.0;
    double sb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        p[i] = a[i] + ea;
        q[i] = b[i] + eb;
        if (!(p[i] > 0.0) || !(q[i] > 0.0)) throw DomainError("spectral information divergence needs positive entries");
        sa += p[i];
        sb += q[i];
    }
    double d = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double pi = p[i] / sa;
        const double qi = q[i] / sb;
        // D(p||q) + D(q||p) = sum (p - q) (log p - log q)
        d += (pi - qi) * (std::log(pi) - std::log(qi));
    }
    return std::max(d, 0.0);
}

double spectral_distance(std::span<const double> a, std::span<const double> b, SpectralMetric metric) {
    switch (metric) {
        case SpectralMetric::sam:
            return spectral_angle(a, b);
        case SpectralMetric::ed:
            return euclidean_distance(a, b);
        case SpectralMetric::scm:
            return spectral_correlation(a, b);
        case SpectralMetric::sid:
            return spectral_information_divergence(a, b);
    }
    return 0.0;
}

}  // namespace specnhmc
