#include <doctest.h>

#include <cmath>

#include "semdec/errors.hpp"
#include "semdec/features.hpp"
#include "semdec/rng.hpp"
#include "test_oracles.hpp"

using namespace semdec;
using namespace semdec::testing;

namespace {

LabeledImage solid_image(int size, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    LabeledImage img = make_image(size, size);
    for (int row = 0; row < size; ++row)
        for (int col = 0; col < size; ++col) {
            img.at(row, col, 0) = r;
            img.at(row, col, 1) = g;
            img.at(row, col, 2) = b;
        }
    return img;
}

LabeledImage random_image(int size, std::uint64_t seed) {
    LabeledImage img = make_image(size, size);
    Rng rng(seed);
    for (auto& byte : img.pixels) byte = static_cast<std::uint8_t>(rng.below(256));
    return img;
}

}  // namespace

TEST_CASE("rgb_to_hsv hexcone anchors") {
    const Hsv red = rgb_to_hsv(255, 0, 0);
    CHECK(red.h == doctest::Approx(0.0));
    CHECK(red.s == doctest::Approx(1.0));
    CHECK(red.v == doctest::Approx(1.0));

    const Hsv black = rgb_to_hsv(0, 0, 0);
    CHECK(black.h == 0.0);  // hue pinned to 0 when s == 0
    CHECK(black.s == 0.0);
    CHECK(black.v == 0.0);

    const Hsv green = rgb_to_hsv(0, 255, 0);
    CHECK(green.h == doctest::Approx(120.0));
    CHECK(green.s == doctest::Approx(1.0));
    CHECK(green.v == doctest::Approx(1.0));
}

TEST_CASE("hsv round trip") {
    Rng rng(42);
    for (int i = 0; i < 200; ++i) {
        const double h = rng.uniform(0, 360);
        const double s = rng.uniform(0.3, 1.0);
        const double v = rng.uniform(0.3, 1.0);
        std::uint8_t r, g, b;
        hsv_to_rgb(h, s, v, r, g, b);
        const Hsv back = rgb_to_hsv(r, g, b);
        const double dh = std::fabs(back.h - h);
        CHECK(std::min(dh, 360.0 - dh) < 2.0);  // 8-bit quantization
        CHECK(back.s == doctest::Approx(s).epsilon(0.05));
        CHECK(back.v == doctest::Approx(v).epsilon(0.05));
    }
}

TEST_CASE("hue bucketing rules") {
    const FeatureBank bank;
    CHECK(hue_bucket(0.0, 1.0, 1.0, bank) == ColorName::Red);
    CHECK(hue_bucket(180.0, 1.0, 1.0, bank) == ColorName::Cyan);
    // achromatic rules fire before hue
    for (double h : {0.0, 90.0, 215.0, 359.0}) {
        CHECK(hue_bucket(h, 0.1, 0.9, bank) == ColorName::White);
        CHECK(hue_bucket(h, 0.5, 0.1, bank) == ColorName::Black);
        CHECK(hue_bucket(h, 1.0, 0.1, bank) == ColorName::Black);
    }
}

TEST_CASE("chromatic ranges partition the hue circle") {
    const FeatureBank bank;
    for (int i = 0; i <= 3600; ++i) {
        const double h = i * 0.1;
        if (h >= 360.0) break;
        int containing = 0;
        for (const auto& entry : bank.hue_table)
            if (entry.range.contains(h)) ++containing;
        REQUIRE(containing == 1);
    }
    double total = 0;
    for (const auto& entry : bank.hue_table) total += entry.range.width();
    CHECK(total == doctest::Approx(360.0));
}

TEST_CASE("bank config validation rejects broken partitions") {
    KeyValueConfig cfg;
    cfg.set("features.hue_ranges",
            "red:0:50,orange:45:90,yellow:90:135,green:135:180,"
            "cyan:180:225,blue:225:270,purple:270:315,magenta:315:360");
    CHECK_THROWS_AS(FeatureBank::from_config(cfg), ConfigError);  // overlap at 45..50

    KeyValueConfig ok;
    ok.set("features.hue_ranges",
           "red:0:45,orange:45:90,yellow:90:135,green:135:180,"
           "cyan:180:225,blue:225:270,purple:270:315,magenta:315:360");
    const FeatureBank bank = FeatureBank::from_config(ok);
    CHECK(hue_bucket(40.0, 1.0, 1.0, bank) == ColorName::Red);
}

TEST_CASE("color features on solid and split images") {
    FeatureBank bank;
    bank.grid = 4;
    const LabeledImage red = solid_image(16, 255, 0, 0);

    const FeatureVector ones = extract_color_feature(red, ColorName::Red, bank);
    REQUIRE(ones.dims == 16);
    for (double v : ones.values) CHECK(v == doctest::Approx(1.0));

    const FeatureVector zeros = extract_color_feature(red, ColorName::Green, bank);
    for (double v : zeros.values) CHECK(v == doctest::Approx(0.0));

    // left half pure red, right half pure blue, pooled on a 2x2 grid
    LabeledImage split = solid_image(16, 0, 0, 255);
    for (int r = 0; r < 16; ++r)
        for (int c = 0; c < 8; ++c) {
            split.at(r, c, 0) = 255;
            split.at(r, c, 2) = 0;
        }
    bank.grid = 2;
    const FeatureVector fv = extract_color_feature(split, ColorName::Red, bank);
    CHECK(fv.values[0] == doctest::Approx(1.0));
    CHECK(fv.values[1] == doctest::Approx(0.0));
    CHECK(fv.values[2] == doctest::Approx(1.0));
    CHECK(fv.values[3] == doctest::Approx(0.0));
    // brute-force per-cell recount
    for (int cell = 0; cell < 4; ++cell) {
        const double expected =
            cell_fraction(split, 2, cell / 2, cell % 2, [&](auto r, auto g, auto b) {
                return pixel_bucket(r, g, b, bank) == ColorName::Red;
            });
        CHECK(fv.values[static_cast<std::size_t>(cell)] == doctest::Approx(expected));
    }
}

TEST_CASE("gabor kernels are zero-mean, unit-norm and period-180") {
    const FeatureBank bank;
    for (double scale : bank.gabor_scales) {
        for (double orientation : bank.gabor_orientations) {
            const GaborParams p = bank.gabor_params_for(scale, orientation, 64, 64);
            const auto kernel = build_gabor_kernel(p);
            double mean = 0, norm2 = 0;
            for (double v : kernel) {
                mean += v;
                norm2 += v * v;
            }
            mean /= static_cast<double>(kernel.size());
            CHECK(std::fabs(mean) < 1e-9);
            CHECK(std::fabs(std::sqrt(norm2) - 1.0) < 1e-9);

            GaborParams flipped = p;
            flipped.orientation = p.orientation + 180.0;
            const auto kernel2 = build_gabor_kernel(flipped);
            for (std::size_t i = 0; i < kernel.size(); ++i)
                CHECK(kernel[i] == doctest::Approx(kernel2[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("gabor parameter construction and clamping") {
    const FeatureBank bank;  // grid 8
    const GaborParams big = bank.gabor_params_for(64 * std::sqrt(2.0), 0, 32, 32);
    CHECK(big.kernel_size % 2 == 1);
    CHECK(big.kernel_size <= 32 - bank.grid + 1);  // clamped to keep the grid poolable
    CHECK(big.wavelength == doctest::Approx(64 * std::sqrt(2.0) * 32.0 / 256.0));
    CHECK(big.sigma == doctest::Approx(0.56 * big.wavelength));

    const GaborParams norm = bank.gabor_params_for(8 * std::sqrt(2.0), 225.0, 64, 64);
    CHECK(norm.orientation == doctest::Approx(45.0));

    GaborParams bad = big;
    bad.kernel_size = 4;
    CHECK_THROWS_AS(build_gabor_kernel(bad), ContractError);
    bad.kernel_size = 1;
    CHECK_THROWS_AS(build_gabor_kernel(bad), ContractError);
}

TEST_CASE("texture response of a constant image is (near) zero") {
    FeatureBank bank;
    bank.grid = 4;
    const LabeledImage flat = solid_image(16, 140, 140, 140);
    const GaborParams p = bank.gabor_params_for(32 * std::sqrt(2.0), 0, 16, 16);
    const FeatureVector fv = extract_texture_feature(flat, p, bank);
    for (double v : fv.values) CHECK(v < 1e-3);
}

TEST_CASE("library convolution path matches the brute-force oracle") {
    FeatureBank bank;
    bank.grid = 2;
    const LabeledImage img = random_image(14, 99);
    GaborParams p = bank.gabor_params_for(40.0, 45.0, 14, 14);
    p.kernel_size = 5;  // valid output 10x10 pools evenly onto the 2x2 grid

    const FeatureVector fv = extract_texture_feature(img, p, bank);

    const auto kernel = build_gabor_kernel(p);
    const auto conv = brute_force_valid_conv(to_gray(img), 14, 14, kernel, 5);
    double max_resp = 0;
    for (double v : conv) max_resp = std::max(max_resp, std::fabs(v));
    for (int gr = 0; gr < 2; ++gr)
        for (int gc = 0; gc < 2; ++gc) {
            double sum = 0;
            for (int r = gr * 5; r < (gr + 1) * 5; ++r)
                for (int c = gc * 5; c < (gc + 1) * 5; ++c)
                    sum += std::fabs(conv[static_cast<std::size_t>(r) * 10 + c]);
            const double expected = sum / 25.0 / std::max(max_resp, 1e-12);
            CHECK(fv.values[static_cast<std::size_t>(gr) * 2 + gc] ==
                  doctest::Approx(expected).epsilon(1e-9));
        }
}

TEST_CASE("a rotated image under a rotated filter gives the rotated feature grid") {
    FeatureBank bank;
    bank.grid = 2;
    const int n = 14;
    const LabeledImage img = random_image(n, 1234);
    LabeledImage rotated = make_image(n, n);  // 90 degrees counterclockwise
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c)
            for (int ch = 0; ch < 3; ++ch) rotated.at(r, c, ch) = img.at(c, n - 1 - r, ch);

    GaborParams p0 = bank.gabor_params_for(40.0, 0.0, n, n);
    p0.kernel_size = 5;
    GaborParams p90 = p0;
    p90.orientation = 90.0;

    const FeatureVector f0 = extract_texture_feature(img, p0, bank);
    const FeatureVector f90 = extract_texture_feature(rotated, p90, bank);

    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) {
            const double original = f0.values[static_cast<std::size_t>(r) * 2 + c];
            const double rotated_cell = f90.values[static_cast<std::size_t>(1 - c) * 2 + r];
            CHECK(original == doctest::Approx(rotated_cell).epsilon(1e-9));
        }
}

TEST_CASE("preprocessing cost table") {
    const FeatureBank bank;
    const auto color = SemanticDescriptor::color(ColorName::Red);
    CHECK(preprocessing_cost(color, 32, 32, bank) == 5120);  // 4*1024 + 1024

    GaborParams p;
    p.wavelength = 3.0;
    p.orientation = 0;
    p.sigma = 1.68;
    p.kernel_size = 7;
    const auto texture = SemanticDescriptor::texture(p);
    CHECK(preprocessing_cost(texture, 32, 32, bank) == 26 * 26 * 49 + 1024);

    // same kind and dims -> equal cost
    CHECK(preprocessing_cost(SemanticDescriptor::color(ColorName::Blue), 32, 32, bank) ==
          preprocessing_cost(color, 32, 32, bank));

    // shared HSV pass drops the conversion part for later color leaves
    CHECK(incremental_preprocessing_cost(color, 32, 32, bank, true) ==
          (bank.cost_color_bucket_test + bank.cost_pool) * 1024);
    // texture cost never shares
    CHECK(incremental_preprocessing_cost(texture, 32, 32, bank, true) ==
          preprocessing_cost(texture, 32, 32, bank));
}

TEST_CASE("feature values stay in [0,1] on random images") {
    FeatureBank bank;
    bank.grid = 4;
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        const LabeledImage img = random_image(20, 1000 + seed);
        for (const auto& descriptor : bank.color_space()) {
            const FeatureVector fv = extract_feature(img, descriptor, bank);
            REQUIRE(fv.dims == 16);
            CHECK(static_cast<long long>(fv.dims) < img.pixel_count());
            for (double v : fv.values) {
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
            }
        }
        for (const auto& descriptor : bank.texture_space(20, 20)) {
            const FeatureVector fv = extract_feature(img, descriptor, bank);
            for (double v : fv.values) {
                CHECK(v >= 0.0);
                CHECK(v <= 1.0 + 1e-12);
            }
        }
    }
}

TEST_CASE("extraction is pure") {
    FeatureBank bank;
    bank.grid = 4;
    const LabeledImage img = random_image(16, 7);
    const auto a = extract_color_feature(img, ColorName::Red, bank);
    const auto b = extract_color_feature(img, ColorName::Red, bank);
    CHECK(a.values == b.values);
}

TEST_CASE("contract errors on degenerate grids and kernels") {
    FeatureBank bank;
    bank.grid = 8;
    const LabeledImage tiny = solid_image(8, 10, 10, 10);
    // dims would equal the pixel count
    CHECK_THROWS_AS(extract_color_feature(tiny, ColorName::Red, bank), ContractError);

    bank.grid = 2;
    GaborParams huge;
    huge.wavelength = 8;
    huge.sigma = 4;
    huge.kernel_size = 21;
    CHECK_THROWS_AS(extract_texture_feature(tiny, huge, bank), ContractError);
}

TEST_CASE("descriptor keys are stable identities") {
    const auto red = SemanticDescriptor::color(ColorName::Red);
    CHECK(red.key() == "color:red");
    const FeatureBank bank;
    const auto t1 = bank.texture_space(32, 32);
    const auto t2 = bank.texture_space(32, 32);
    REQUIRE(t1.size() == 20);
    for (std::size_t i = 0; i < t1.size(); ++i) CHECK(t1[i].key() == t2[i].key());
}
