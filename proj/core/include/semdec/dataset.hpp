#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "semdec/config.hpp"
#include "semdec/image.hpp"

namespace semdec {

// ---------------------------------------------------------------------------
// CIFAR-10 binary batches: 3073-byte records, 1 label byte + 32*32 planar
// R, G, B planes, row-major.

// Load a single .bin batch file, or every *.bin batch in a directory
// (standard batch names first, others in lexical order). detection_label is
// left Unset; class_id comes from the label byte.
std::vector<LabeledImage> load_cifar10(const std::filesystem::path& path);

// Re-encode one image as a 3073-byte CIFAR record. Requires 32x32 and a
// class_id in [0, 9].
std::vector<std::uint8_t> cifar10_record_bytes(const LabeledImage& image);

void write_cifar10(const std::vector<LabeledImage>& images, const std::filesystem::path& file);

// ---------------------------------------------------------------------------
// Deterministic synthetic corpus.
//
// Variants are derived from the spec lists:
//   palette only        -> solid discs over dark-noise backgrounds,
//                          class_id = palette index
//   orientations only   -> full-image sinusoidal gratings,
//                          class_id = orientation index
//   both nonempty       -> discs over grating backgrounds (cross product),
//                          class_id = palette_idx * n_orientations + orient_idx
// Images are assigned to variants round-robin; everything is a pure function
// of (spec, seed).

struct SyntheticSpec {
    int count = 0;
    int image_size = 32;
    std::vector<std::string> palette;     // color names (bucket-center hues)
    std::vector<double> orientations;     // degrees
    std::uint64_t seed = 0;
    double grating_wavelength = 0.0;      // pixels; 0 -> image_size / 4

    // Keys: count, size, palette, orientations, seed, grating_wavelength.
    static SyntheticSpec from_config(const KeyValueConfig& cfg);
    int variant_count() const;
};

std::vector<LabeledImage> generate_synthetic(const SyntheticSpec& spec);

// RGB for a palette color name: chromatic names map to their bucket-center
// hue at full saturation/value, white to (255,255,255), black to (20,20,20).
void palette_rgb(const std::string& name, std::uint8_t& r, std::uint8_t& g, std::uint8_t& b);

// ---------------------------------------------------------------------------
// Binary detection tasks.

struct TaskOptions {
    double train_fraction = 0.8;
    int test_size = 0;  // 0 -> use the held-out pool size
};

struct DetectionTask {
    std::vector<LabeledImage> train_set;
    std::vector<LabeledImage> test_set;
    int target_class = -1;
    double clutter_fraction = 0.0;
    std::uint64_t seed = 0;
};

// Labels images (target_class -> ObjectOfInterest, rest -> Clutter), splits
// train/test per label group, then resamples the test set to the requested
// clutter fraction (without replacement when the pool allows, with
// replacement otherwise). The split stream does not depend on
// clutter_fraction, so tasks built from the same (images, seed) at different
// fractions share one train set.
DetectionTask make_detection_task(const std::vector<LabeledImage>& images, int target_class,
                                  double clutter_fraction, std::uint64_t seed,
                                  const TaskOptions& options = {});

double measured_clutter_fraction(const std::vector<LabeledImage>& set);

}  // namespace semdec
