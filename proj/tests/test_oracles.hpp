// Independent brute-force reference implementations used to freeze expected
// values. These deliberately avoid the library's extraction code paths.
#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "semdec/features.hpp"
#include "semdec/image.hpp"

namespace semdec::testing {

// Fraction of pixels inside one pooling cell matching a predicate, computed
// with explicit per-cell loops.
template <typename Pred>
double cell_fraction(const LabeledImage& img, int grid, int cell_row, int cell_col, Pred pred) {
    const int r0 = cell_row * img.height / grid;
    const int r1 = (cell_row + 1) * img.height / grid;
    const int c0 = cell_col * img.width / grid;
    const int c1 = (cell_col + 1) * img.width / grid;
    long long hits = 0, total = 0;
    for (int r = r0; r < r1; ++r) {
        for (int c = c0; c < c1; ++c) {
            ++total;
            if (pred(img.at(r, c, 0), img.at(r, c, 1), img.at(r, c, 2))) ++hits;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(total);
}

// Plain valid cross-correlation of a grayscale image with a kernel, written
// as one flat quadruple loop over output coordinates.
inline std::vector<double> brute_force_valid_conv(const std::vector<double>& gray, int h, int w,
                                                  const std::vector<double>& kernel, int k) {
    const int oh = h - k + 1;
    const int ow = w - k + 1;
    std::vector<double> out(static_cast<std::size_t>(oh) * ow, 0.0);
    for (int orow = 0; orow < oh; ++orow)
        for (int ocol = 0; ocol < ow; ++ocol) {
            double acc = 0.0;
            for (int kr = 0; kr < k; ++kr)
                for (int kc = 0; kc < k; ++kc)
                    acc += gray[static_cast<std::size_t>(orow + kr) * w + (ocol + kc)] *
                           kernel[static_cast<std::size_t>(kr) * k + kc];
            out[static_cast<std::size_t>(orow) * ow + ocol] = acc;
        }
    return out;
}

inline std::vector<double> to_gray(const LabeledImage& img) {
    std::vector<double> gray(static_cast<std::size_t>(img.height) * img.width);
    for (int r = 0; r < img.height; ++r)
        for (int c = 0; c < img.width; ++c)
            gray[static_cast<std::size_t>(r) * img.width + c] =
                (0.299 * img.at(r, c, 0) + 0.587 * img.at(r, c, 1) + 0.114 * img.at(r, c, 2)) /
                255.0;
    return gray;
}

// Mean rectified response of an image under a Gabor kernel, brute force.
inline double brute_force_energy(const LabeledImage& img, const GaborParams& params) {
    const auto kernel = build_gabor_kernel(params);
    const auto conv =
        brute_force_valid_conv(to_gray(img), img.height, img.width, kernel, params.kernel_size);
    double total = 0.0;
    for (double v : conv) total += std::fabs(v);
    return total / static_cast<double>(conv.size());
}

}  // namespace semdec::testing
