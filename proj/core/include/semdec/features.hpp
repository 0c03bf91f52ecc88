#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "semdec/config.hpp"
#include "semdec/image.hpp"

namespace semdec {

// ---------------------------------------------------------------------------
// Color

enum class ColorName {
    Red,
    Orange,
    Yellow,
    Green,
    Cyan,
    Blue,
    Purple,
    Magenta,
    White,
    Black,
};

std::string color_name_string(ColorName name);
ColorName color_name_from_string(const std::string& s);

struct Hsv {
    double h;  // degrees in [0, 360); 0 when s == 0
    double s;  // [0, 1]
    double v;  // [0, 1]
};

Hsv rgb_to_hsv(std::uint8_t r, std::uint8_t g, std::uint8_t b);
void hsv_to_rgb(double h, double s, double v, std::uint8_t& r, std::uint8_t& g, std::uint8_t& b);

// Half-open hue arc [low, high) in degrees; low > high means wraparound
// through 0.
struct HueRange {
    double low = 0.0;
    double high = 0.0;

    bool contains(double h) const {
        return low <= high ? (h >= low && h < high) : (h >= low || h < high);
    }
    double width() const { return low <= high ? high - low : 360.0 - low + high; }
};

// ---------------------------------------------------------------------------
// Texture

struct GaborParams {
    double wavelength = 0.0;      // pixels
    double orientation = 0.0;     // degrees, normalized to [0, 180)
    double sigma = 0.0;           // pixels
    double gamma = 0.5;           // aspect ratio
    int kernel_size = 0;          // odd, >= 3

    bool operator==(const GaborParams&) const = default;
};

// Even-phase Gabor kernel, DC-removed then scaled to unit L2 norm.
// Row-major kernel_size x kernel_size. Throws ContractError if kernel_size
// is even or < 3.
std::vector<double> build_gabor_kernel(const GaborParams& params);

// ---------------------------------------------------------------------------
// Descriptors

struct SemanticDescriptor {
    enum class Kind { Color, Texture };

    Kind kind = Kind::Color;
    ColorName bucket = ColorName::Red;  // valid when kind == Color
    GaborParams gabor;                  // valid when kind == Texture

    static SemanticDescriptor color(ColorName name) {
        SemanticDescriptor d;
        d.kind = Kind::Color;
        d.bucket = name;
        return d;
    }
    static SemanticDescriptor texture(const GaborParams& params) {
        SemanticDescriptor d;
        d.kind = Kind::Texture;
        d.gabor = params;
        return d;
    }

    // Stable identity string, also used as cache/serialization key.
    std::string key() const;
    bool operator==(const SemanticDescriptor& other) const { return key() == other.key(); }
};

struct FeatureVector {
    std::vector<double> values;  // each in [0, 1]
    int dims = 0;                // grid * grid
    SemanticDescriptor descriptor;
    long long extraction_cost = 0;  // MACs, standalone accounting
};

// ---------------------------------------------------------------------------
// Bank: the full feature-extraction configuration (hue table, Gabor space,
// pooling grid, cost constants). Defaults are embedded; every field can be
// overridden from a key=value config file.

struct FeatureBank {
    struct ChromaticEntry {
        ColorName name;
        HueRange range;
    };

    // Eight 45-degree arcs centered on multiples of 45, Red wrapping through 0.
    std::array<ChromaticEntry, 8> hue_table{{
        {ColorName::Red, {337.5, 22.5}},
        {ColorName::Orange, {22.5, 67.5}},
        {ColorName::Yellow, {67.5, 112.5}},
        {ColorName::Green, {112.5, 157.5}},
        {ColorName::Cyan, {157.5, 202.5}},
        {ColorName::Blue, {202.5, 247.5}},
        {ColorName::Purple, {247.5, 292.5}},
        {ColorName::Magenta, {292.5, 337.5}},
    }};

    // Achromatic rules, applied before hue bucketing.
    double white_sat_max = 0.2;
    double white_val_min = 0.8;
    double black_val_max = 0.2;

    // Pooling grid (features are grid x grid).
    int grid = 8;

    // Gabor search space: reference wavelengths at reference_dim, rescaled per
    // image by min(height, width) / reference_dim.
    std::vector<double> gabor_scales;          // default 4√2 .. 64√2
    std::vector<double> gabor_orientations;    // default 0, 45, 90, 135
    double reference_dim = 256.0;
    double sigma_factor = 0.56;
    double gabor_gamma = 0.5;

    // Cost table (MAC-equivalents per pixel). The hexcone conversion part is
    // charged once per image when several color leaves share the HSV pass;
    // the bucket test and pooling are charged per leaf. Standalone color cost
    // is (color_convert + color_bucket_test + pool) * H * W.
    int cost_color_convert = 3;
    int cost_color_bucket_test = 1;
    int cost_pool = 1;

    FeatureBank();

    static FeatureBank from_config(const KeyValueConfig& cfg);
    void apply_config(const KeyValueConfig& cfg);
    void validate() const;  // throws ConfigError if the hue table is not a partition

    // Gabor parameters for one (reference scale, orientation) cell at a given
    // image size. Kernel size is 4*sigma+1 rounded up to odd, clamped so the
    // valid convolution output still covers the pooling grid.
    GaborParams gabor_params_for(double reference_scale, double orientation_deg,
                                 int image_height, int image_width) const;

    // The full descriptor search spaces for a given image size.
    std::vector<SemanticDescriptor> color_space() const;
    std::vector<SemanticDescriptor> texture_space(int image_height, int image_width) const;
};

// ---------------------------------------------------------------------------
// Operations

ColorName hue_bucket(double h, double s, double v, const FeatureBank& bank);
ColorName pixel_bucket(std::uint8_t r, std::uint8_t g, std::uint8_t b, const FeatureBank& bank);

FeatureVector extract_color_feature(const LabeledImage& image, ColorName bucket,
                                    const FeatureBank& bank);
FeatureVector extract_texture_feature(const LabeledImage& image, const GaborParams& params,
                                      const FeatureBank& bank);
FeatureVector extract_feature(const LabeledImage& image, const SemanticDescriptor& descriptor,
                              const FeatureBank& bank);

// Standalone preprocessing cost in MACs:
//   color:   (c_hsv + c_pool) * H * W          with c_hsv = convert + bucket test
//   texture: H' * W' * K^2 + c_pool * H * W    with H', W' the valid-conv dims
long long preprocessing_cost(const SemanticDescriptor& descriptor, int image_height,
                             int image_width, const FeatureBank& bank);

// Cost of one more leaf given that the HSV conversion may already have been
// paid for this image (color leaves share a single HSV pass).
long long incremental_preprocessing_cost(const SemanticDescriptor& descriptor, int image_height,
                                         int image_width, const FeatureBank& bank,
                                         bool hsv_already_charged);

}  // namespace semdec
