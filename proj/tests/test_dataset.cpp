#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "specnhmc/dataset.hpp"
#include "specnhmc/error.hpp"

using namespace specnhmc;

namespace {

SpectralLibrary small_library(const std::vector<std::size_t>& sizes, std::size_t bands, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.05, 0.95);
    SpectralLibrary lib;
    for (std::size_t b = 0; b < bands; ++b) lib.grid.push_back(0.4 + 0.01 * static_cast<double>(b));
    for (std::size_t c = 0; c < sizes.size(); ++c) {
        lib.class_names[static_cast<int>(c)] = "class" + std::to_string(c);
        for (std::size_t j = 0; j < sizes[c]; ++j) {
            Spectrum s;
            s.sample_id = "c" + std::to_string(c) + "_" + std::to_string(j);
            s.class_id = static_cast<int>(c);
            s.wavelengths = lib.grid;
            for (std::size_t b = 0; b < bands; ++b) s.reflectance.push_back(u(rng));
            lib.spectra.push_back(s);
        }
    }
    return lib;
}

template <typename E>
std::string error_text(auto&& f) {
    try {
        f();
    } catch (const E& e) {
        return e.what();
    }
    return "<no throw>";
}

}  // namespace

TEST_CASE("library CSV round trip") {
    auto lib = small_library({3, 2}, 6, 1);
    lib.grid = uniform_grid(0.35, 0.375, 0.005);
    for (auto& s : lib.spectra) s.wavelengths = lib.grid;
    const auto back = parse_library(format_library(lib));
    CHECK(back == lib);
    CHECK(format_library(back) == format_library(lib));
}

TEST_CASE("ragged row names the sample") {
    const std::string text =
        "sample_id,class,0.400000,0.410000,0.420000,0.430000,0.440000,0.450000\n"
        "good,a,1,1,1,1,1,1\n"
        "short_one,a,1,1,1,1,1\n";
    const auto msg = error_text<ParseError>([&] { parse_library(text); });
    CHECK(msg.find("short_one") != std::string::npos);
}

TEST_CASE("empty file reports no spectra") {
    CHECK(error_text<ParseError>([] { parse_library(""); }).find("no spectra") != std::string::npos);
    CHECK(error_text<ParseError>([] { parse_library("sample_id,class,0.4,0.5\n"); }).find("no spectra") !=
          std::string::npos);
}

TEST_CASE("non-increasing wavelengths and unknown classes are rejected") {
    CHECK_THROWS_AS(parse_library("sample_id,class,0.5,0.4\nx,a,1,1\n"), ValidationError);
    const std::vector<std::string> declared{"a"};
    CHECK_THROWS_AS(parse_library("sample_id,class,0.4,0.5\nx,b,1,1\n", declared), ValidationError);
}

TEST_CASE("class ids follow first appearance") {
    const auto lib = parse_library("sample_id,class,0.4,0.5\nx,zeta,1,1\ny,alpha,1,1\n");
    CHECK(lib.class_names.at(0) == "zeta");
    CHECK(lib.class_names.at(1) == "alpha");
}

TEST_CASE("preprocess scales to unit maximum") {
    SpectralLibrary lib;
    lib.grid = uniform_grid(0.35, 2.6, 0.005);
    lib.class_names[0] = "a";
    Spectrum s;
    s.sample_id = "x";
    s.wavelengths = lib.grid;
    for (std::size_t b = 0; b < lib.grid.size(); ++b) s.reflectance.push_back(0.8 * (0.5 + 0.5 * std::sin(b * 0.01)));
    lib.spectra.push_back(s);
    Spectrum flat = s;
    flat.sample_id = "flat";
    std::fill(flat.reflectance.begin(), flat.reflectance.end(), 0.3);
    lib.spectra.push_back(flat);

    const auto out = preprocess(lib).library;
    REQUIRE(out.size() == 2);
    const double peak = *std::max_element(s.reflectance.begin(), s.reflectance.end());
    for (std::size_t b = 0; b < lib.grid.size(); ++b) {
        CHECK(out.spectra[0].reflectance[b] == doctest::Approx(s.reflectance[b] / peak).epsilon(1e-14));
        CHECK(out.spectra[1].reflectance[b] == 1.0);
    }
    CHECK(*std::max_element(out.spectra[0].reflectance.begin(), out.spectra[0].reflectance.end()) == 1.0);
    CHECK(preprocess(out).library == out);
}

TEST_CASE("preprocess is exact at coincident nodes of a finer grid") {
    SpectralLibrary lib;
    lib.grid = uniform_grid(0.35, 2.6, 0.0025);
    lib.class_names[0] = "a";
    Spectrum s;
    s.sample_id = "fine";
    s.wavelengths = lib.grid;
    for (std::size_t b = 0; b < lib.grid.size(); ++b) s.reflectance.push_back(0.5 + 0.4 * std::cos(b * 0.037));
    lib.spectra.push_back(s);
    const auto out = preprocess(lib).library;
    const double peak = *std::max_element(s.reflectance.begin(), s.reflectance.end());
    REQUIRE(out.grid.size() == 451);
    double worst = 0.0;
    for (std::size_t b = 0; b < out.grid.size(); ++b)
        worst = std::max(worst, std::abs(out.spectra[0].reflectance[b] - s.reflectance[2 * b] / peak));
    CHECK(worst <= 1e-12);
}

TEST_CASE("preprocess rejects short coverage and all-zero spectra") {
    SpectralLibrary lib;
    lib.grid = uniform_grid(0.40, 2.6, 0.005);
    lib.class_names[0] = "a";
    Spectrum s;
    s.sample_id = "short";
    s.wavelengths = lib.grid;
    s.reflectance.assign(lib.grid.size(), 0.5);
    lib.spectra.push_back(s);
    const auto r = preprocess(lib, {0.40, 2.6, 0.005});
    CHECK(r.rejected.empty());
    const auto r2 = preprocess(lib, {0.35, 2.6, 0.005});
    REQUIRE(r2.rejected.size() >= 1);
    CHECK(r2.rejected.front().find("short") != std::string::npos);

    lib.spectra[0].reflectance.assign(lib.grid.size(), 0.0);
    CHECK_THROWS_AS(preprocess(lib, {0.40, 2.6, 0.005}), DomainError);
}

TEST_CASE("balance tops classes up with convex mixtures") {
    const auto lib = small_library({4, 7}, 8, 2);
    const auto r = balance_classes(lib, 7, 11);
    CHECK(r.synthesized == 3);
    const auto hist = r.library.class_histogram();
    CHECK(hist.at(0) == 7);
    CHECK(hist.at(1) == 7);
    CHECK_FALSE(r.mixing_note.empty());
    for (const auto& s : r.library.spectra) {
        if (s.class_id != 0) continue;
        for (std::size_t b = 0; b < lib.grid.size(); ++b) {
            double lo = 1e9, hi = -1e9;
            for (const auto& p : lib.spectra)
                if (p.class_id == 0) {
                    lo = std::min(lo, p.reflectance[b]);
                    hi = std::max(hi, p.reflectance[b]);
                }
            CHECK(s.reflectance[b] >= lo - 1e-15);
            CHECK(s.reflectance[b] <= hi + 1e-15);
        }
    }
    CHECK(balance_classes(lib, 7, 11).library == r.library);
}

TEST_CASE("balance errors") {
    CHECK_THROWS_AS(balance_classes(small_library({1, 3}, 4, 3), 5, 0), DomainError);
    CHECK_THROWS_AS(balance_classes(small_library({4, 7}, 4, 3), 5, 0), DomainError);
}

TEST_CASE("DMP kernel matches the closed-form stencil") {
    for (int i = 0; i <= 6; ++i) {
        const double dmp = 0.70 + 0.05 * i;
        const auto k = dmp_to_kernel(dmp);
        CAPTURE(dmp);
        CHECK(std::abs(k.center() - dmp) <= 1e-6);
        double sum = 0.0;
        for (const auto& row : k.weights)
            for (double w : row) sum += w;
        CHECK(std::abs(sum - 1.0) <= 1e-12);
        const double e = oracle::dmp_ratio(dmp);
        CHECK(k.weights[0][1] == doctest::Approx(dmp * e).epsilon(1e-5));
        CHECK(k.weights[0][0] == doctest::Approx(dmp * e * e).epsilon(1e-5));
        CHECK(k.weights[0][0] == k.weights[2][2]);
        CHECK(k.weights[0][2] == k.weights[2][0]);
        CHECK(k.weights[0][0] == k.weights[0][2]);
        CHECK(k.weights[0][1] == k.weights[1][0]);
        CHECK(k.weights[1][2] == k.weights[2][1]);
        CHECK(k.weights[0][1] == k.weights[2][1]);
    }
    const auto delta = dmp_to_kernel(1.0);
    CHECK(delta.center() == 1.0);
    CHECK(delta.weights[0][0] == 0.0);
    CHECK(std::abs(dmp_to_kernel(0.12).center() - 0.12) <= 1e-6);
    CHECK_THROWS_AS(dmp_to_kernel(1.0 / 9.0), DomainError);
    CHECK_THROWS_AS(dmp_to_kernel(1.01), DomainError);
    CHECK_THROWS_AS(dmp_to_kernel(0.0), DomainError);
}

TEST_CASE("blur at dmp 1 is the identity") {
    std::vector<std::size_t> sizes(26, 3);
    const auto lib = small_library(sizes, 10, 4);
    const auto r = blur_library(lib, 1.0, 5);
    CHECK(r.library == lib);
}

TEST_CASE("blurred spectra are kernel-weighted sums of toroidal neighbours") {
    const auto lib = small_library({5, 6, 4}, 7, 6);
    const auto r = blur_library(lib, 0.7, 9);
    const auto& lay = r.layout;
    const auto shape = blur_grid_shape(lib.size());
    CHECK(lay.rows == shape.first);
    CHECK(lay.cols == shape.second);
    REQUIRE(lay.cell_source.size() == lay.rows * lay.cols);
    for (std::size_t i = 0; i < lib.size(); ++i) {
        const std::size_t cell = lay.cell_of[i];
        REQUIRE(lay.cell_source[cell] == i);
        const long long r0 = static_cast<long long>(cell / lay.cols);
        const long long c0 = static_cast<long long>(cell % lay.cols);
        for (std::size_t b = 0; b < lib.grid.size(); ++b) {
            double want = 0.0, lo = 1e9, hi = -1e9;
            for (int dr = -1; dr <= 1; ++dr)
                for (int dc = -1; dc <= 1; ++dc) {
                    const auto rr = static_cast<std::size_t>((r0 + dr + static_cast<long long>(lay.rows)) % static_cast<long long>(lay.rows));
                    const auto cc = static_cast<std::size_t>((c0 + dc + static_cast<long long>(lay.cols)) % static_cast<long long>(lay.cols));
                    const double v = lib.spectra[lay.cell_source[rr * lay.cols + cc]].reflectance[b];
                    want += r.kernel.weights[dr + 1][dc + 1] * v;
                    lo = std::min(lo, v);
                    hi = std::max(hi, v);
                }
            CHECK(r.library.spectra[i].reflectance[b] == doctest::Approx(want).epsilon(1e-13));
            CHECK(r.library.spectra[i].reflectance[b] <= hi + 1e-15);
            CHECK(r.library.spectra[i].reflectance[b] >= lo - 1e-15);
        }
        CHECK(r.library.spectra[i].class_id == lib.spectra[i].class_id);
        CHECK(r.library.spectra[i].sample_id == lib.spectra[i].sample_id);
    }
}

TEST_CASE("grid shape is the smallest near-square cover") {
    CHECK(blur_grid_shape(1) == std::pair<std::size_t, std::size_t>{1, 1});
    CHECK(blur_grid_shape(10) == std::pair<std::size_t, std::size_t>{4, 3});
    CHECK(blur_grid_shape(325) == std::pair<std::size_t, std::size_t>{19, 18});
    for (std::size_t n = 1; n < 200; ++n) {
        const auto [r, c] = blur_grid_shape(n);
        CHECK(r * c >= n);
    }
}

TEST_CASE("split gives disjoint per-class subsets of exact size") {
    std::vector<std::size_t> sizes(4, 65);
    const auto lib = small_library(sizes, 3, 7);
    const auto [train, test] = split_train_test(lib, 52, 13, 8);
    CHECK(train.size() == 52 * 4);
    CHECK(test.size() == 13 * 4);
    for (const auto& [id, n] : train.class_histogram()) CHECK(n == 52);
    for (const auto& [id, n] : test.class_histogram()) CHECK(n == 13);
    std::set<std::string> ids;
    for (const auto& s : train.spectra) ids.insert(s.sample_id);
    for (const auto& s : test.spectra) CHECK(ids.count(s.sample_id) == 0);
    const auto again = split_train_test(lib, 52, 13, 8);
    CHECK(again.first == train);
    CHECK(again.second == test);
    CHECK_THROWS_AS(split_train_test(lib, 60, 10, 8), DomainError);
}

TEST_CASE("synthetic library follows its options") {
    SyntheticOptions o;
    o.min_per_class = 3;
    o.max_per_class = 5;
    const auto s = synthesize_library(o, 3);
    CHECK(s.library.class_names.size() == 5);
    CHECK(s.library.grid.size() == 451);
    CHECK(s.dips.size() == s.library.size());
    CHECK_NOTHROW(s.library.validate());
    for (std::size_t i = 0; i < s.dips.size(); ++i) {
        const auto& d = s.dips[i];
        CHECK(std::abs(d.center_um - o.dip_centers_um[d.class_id]) <= o.center_jitter_um);
        CHECK(d.sigma_um >= o.width_min_um);
        CHECK(d.sigma_um <= o.width_max_um);
    }
    CHECK(synthesize_library(o, 3).library == s.library);
    o.slope_min = 0.3;
    CHECK_THROWS_AS(synthesize_library(o, 3), DomainError);
}
