#pragma once

#include <cstdint>
#include <vector>

#include "semdec/errors.hpp"

namespace semdec {

enum class DetectionLabel { Unset, ObjectOfInterest, Clutter };

// 8-bit RGB raster, row-major, channel-interleaved (H x W x 3).
struct LabeledImage {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> pixels;
    int class_id = -1;
    DetectionLabel detection_label = DetectionLabel::Unset;

    std::uint8_t at(int row, int col, int channel) const {
        return pixels[static_cast<std::size_t>((row * width + col) * 3 + channel)];
    }
    std::uint8_t& at(int row, int col, int channel) {
        return pixels[static_cast<std::size_t>((row * width + col) * 3 + channel)];
    }
    long long pixel_count() const { return static_cast<long long>(height) * width; }
};

inline LabeledImage make_image(int height, int width) {
    if (height < 8 || width < 8)
        throw ContractError("image dimensions must be at least 8x8, got " +
                            std::to_string(height) + "x" + std::to_string(width));
    LabeledImage img;
    img.height = height;
    img.width = width;
    img.pixels.assign(static_cast<std::size_t>(height) * width * 3, 0);
    return img;
}

}  // namespace semdec
