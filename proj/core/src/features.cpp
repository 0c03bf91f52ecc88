#include "semdec/features.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "semdec/errors.hpp"

namespace semdec {

namespace {

constexpr double kPi = 3.14159265358979323846;

const char* kColorNames[] = {"red",  "orange", "yellow", "green", "cyan",
                             "blue", "purple", "magenta", "white", "black"};

std::string format_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace

std::string color_name_string(ColorName name) {
    return kColorNames[static_cast<int>(name)];
}

ColorName color_name_from_string(const std::string& s) {
    for (int i = 0; i < 10; ++i)
        if (s == kColorNames[i]) return static_cast<ColorName>(i);
    throw ConfigError("unknown color name: '" + s + "'");
}

Hsv rgb_to_hsv(std::uint8_t r8, std::uint8_t g8, std::uint8_t b8) {
    const double r = r8 / 255.0;
    const double g = g8 / 255.0;
    const double b = b8 / 255.0;
    const double maxc = std::max({r, g, b});
    const double minc = std::min({r, g, b});
    const double delta = maxc - minc;

    Hsv out;
    out.v = maxc;
    out.s = maxc <= 0.0 ? 0.0 : delta / maxc;
    if (delta <= 0.0) {
        out.h = 0.0;  // hue undefined when s == 0, pinned to 0
        return out;
    }
    double h;
    if (maxc == r)
        h = 60.0 * ((g - b) / delta);
    else if (maxc == g)
        h = 60.0 * (2.0 + (b - r) / delta);
    else
        h = 60.0 * (4.0 + (r - g) / delta);
    if (h < 0.0) h += 360.0;
    if (h >= 360.0) h -= 360.0;
    out.h = h;
    return out;
}

void hsv_to_rgb(double h, double s, double v, std::uint8_t& r, std::uint8_t& g, std::uint8_t& b) {
    const double c = v * s;
    const double hp = h / 60.0;
    const double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
    double r1 = 0, g1 = 0, b1 = 0;
    if (hp < 1)      { r1 = c; g1 = x; }
    else if (hp < 2) { r1 = x; g1 = c; }
    else if (hp < 3) { g1 = c; b1 = x; }
    else if (hp < 4) { g1 = x; b1 = c; }
    else if (hp < 5) { r1 = x; b1 = c; }
    else             { r1 = c; b1 = x; }
    const double m = v - c;
    r = static_cast<std::uint8_t>(std::llround(std::clamp(r1 + m, 0.0, 1.0) * 255.0));
    g = static_cast<std::uint8_t>(std::llround(std::clamp(g1 + m, 0.0, 1.0) * 255.0));
    b = static_cast<std::uint8_t>(std::llround(std::clamp(b1 + m, 0.0, 1.0) * 255.0));
}

std::vector<double> build_gabor_kernel(const GaborParams& p) {
    if (p.kernel_size < 3 || p.kernel_size % 2 == 0)
        throw ContractError("gabor kernel_size must be odd and >= 3, got " +
                            std::to_string(p.kernel_size));
    if (p.wavelength <= 0.0) throw ContractError("gabor wavelength must be positive");
    if (p.sigma <= 0.0) throw ContractError("gabor sigma must be positive");

    const int k = p.kernel_size;
    const int c = k / 2;
    const double theta = p.orientation * kPi / 180.0;
    const double cos_t = std::cos(theta);
    const double sin_t = std::sin(theta);
    const double inv_two_sigma2 = 1.0 / (2.0 * p.sigma * p.sigma);
    const double gamma2 = p.gamma * p.gamma;

    std::vector<double> kernel(static_cast<std::size_t>(k) * k);
    for (int row = 0; row < k; ++row) {
        for (int col = 0; col < k; ++col) {
            const double x = col - c;
            const double y = row - c;
            const double xr = x * cos_t + y * sin_t;
            const double yr = -x * sin_t + y * cos_t;
            const double envelope = std::exp(-(xr * xr + gamma2 * yr * yr) * inv_two_sigma2);
            kernel[static_cast<std::size_t>(row) * k + col] =
                envelope * std::cos(2.0 * kPi * xr / p.wavelength);
        }
    }

    double mean = 0.0;
    for (double v : kernel) mean += v;
    mean /= static_cast<double>(kernel.size());
    double norm2 = 0.0;
    for (double& v : kernel) {
        v -= mean;
        norm2 += v * v;
    }
    const double norm = std::sqrt(norm2);
    if (norm < 1e-12) throw ContractError("degenerate gabor kernel (zero energy after DC removal)");
    for (double& v : kernel) v /= norm;
    return kernel;
}

std::string SemanticDescriptor::key() const {
    if (kind == Kind::Color) return "color:" + color_name_string(bucket);
    return "texture:w" + format_double(gabor.wavelength) + ":o" + format_double(gabor.orientation) +
           ":s" + format_double(gabor.sigma) + ":g" + format_double(gabor.gamma) + ":k" +
           std::to_string(gabor.kernel_size);
}

FeatureBank::FeatureBank() {
    const double rt2 = std::sqrt(2.0);
    gabor_scales = {4 * rt2, 8 * rt2, 16 * rt2, 32 * rt2, 64 * rt2};
    gabor_orientations = {0.0, 45.0, 90.0, 135.0};
}

FeatureBank FeatureBank::from_config(const KeyValueConfig& cfg) {
    FeatureBank bank;
    bank.apply_config(cfg);
    return bank;
}

void FeatureBank::apply_config(const KeyValueConfig& cfg) {
    grid = cfg.get_int("features.grid", grid);
    white_sat_max = cfg.get_double("features.white_sat_max", white_sat_max);
    white_val_min = cfg.get_double("features.white_val_min", white_val_min);
    black_val_max = cfg.get_double("features.black_val_max", black_val_max);
    gabor_scales = cfg.get_double_list("features.gabor_scales", gabor_scales);
    gabor_orientations = cfg.get_double_list("features.gabor_orientations", gabor_orientations);
    reference_dim = cfg.get_double("features.reference_dim", reference_dim);
    sigma_factor = cfg.get_double("features.sigma_factor", sigma_factor);
    gabor_gamma = cfg.get_double("features.gabor_gamma", gabor_gamma);
    cost_color_convert = cfg.get_int("features.cost_color_convert", cost_color_convert);
    cost_color_bucket_test = cfg.get_int("features.cost_color_bucket_test", cost_color_bucket_test);
    cost_pool = cfg.get_int("features.cost_pool", cost_pool);

    if (cfg.has("features.hue_ranges")) {
        // name:low:high, comma separated, exactly 8 chromatic entries
        const auto items = split_list(cfg.get_string("features.hue_ranges", ""));
        if (items.size() != hue_table.size())
            throw ConfigError("features.hue_ranges must list exactly 8 entries");
        for (std::size_t i = 0; i < items.size(); ++i) {
            const auto& item = items[i];
            const auto p1 = item.find(':');
            const auto p2 = item.find(':', p1 == std::string::npos ? p1 : p1 + 1);
            if (p1 == std::string::npos || p2 == std::string::npos)
                throw ConfigError("features.hue_ranges entry '" + item + "' not name:low:high");
            hue_table[i].name = color_name_from_string(trim(item.substr(0, p1)));
            hue_table[i].range.low = std::stod(item.substr(p1 + 1, p2 - p1 - 1));
            hue_table[i].range.high = std::stod(item.substr(p2 + 1));
        }
    }
    validate();
}

void FeatureBank::validate() const {
    if (grid < 1) throw ConfigError("features.grid must be >= 1");
    if (gabor_scales.empty() || gabor_orientations.empty())
        throw ConfigError("gabor scale/orientation lists must be nonempty");
    // Chromatic arcs must tile [0, 360) exactly. Split wraparound arcs and
    // check the pieces line up end to end.
    std::vector<std::pair<double, double>> pieces;
    for (const auto& entry : hue_table) {
        const auto& r = entry.range;
        if (r.low < 0 || r.low >= 360 || r.high < 0 || r.high > 360)
            throw ConfigError("hue range bounds must lie in [0, 360]");
        if (r.low <= r.high) {
            pieces.emplace_back(r.low, r.high);
        } else {
            pieces.emplace_back(r.low, 360.0);
            pieces.emplace_back(0.0, r.high);
        }
    }
    std::sort(pieces.begin(), pieces.end());
    double cursor = 0.0;
    for (const auto& [lo, hi] : pieces) {
        if (std::fabs(lo - cursor) > 1e-9)
            throw ConfigError("hue ranges do not partition [0,360): gap or overlap at " +
                              format_double(lo));
        cursor = hi;
    }
    if (std::fabs(cursor - 360.0) > 1e-9)
        throw ConfigError("hue ranges do not cover the full circle");
}

GaborParams FeatureBank::gabor_params_for(double reference_scale, double orientation_deg,
                                          int image_height, int image_width) const {
    if (reference_scale <= 0) throw ConfigError("gabor scale must be positive");
    const int min_dim = std::min(image_height, image_width);
    GaborParams p;
    p.wavelength = reference_scale * static_cast<double>(min_dim) / reference_dim;
    p.orientation = std::fmod(orientation_deg, 180.0);
    if (p.orientation < 0) p.orientation += 180.0;
    p.sigma = sigma_factor * p.wavelength;
    p.gamma = gabor_gamma;

    int k = static_cast<int>(std::ceil(4.0 * p.sigma + 1.0));
    if (k % 2 == 0) ++k;
    k = std::max(k, 3);
    // Valid-convolution output must still cover the pooling grid.
    int k_max = min_dim - grid + 1;
    if (k_max % 2 == 0) --k_max;
    if (k_max < 3)
        throw ConfigError("pooling grid " + std::to_string(grid) + " too large for " +
                          std::to_string(image_height) + "x" + std::to_string(image_width) +
                          " images");
    p.kernel_size = std::min(k, k_max);
    return p;
}

std::vector<SemanticDescriptor> FeatureBank::color_space() const {
    std::vector<SemanticDescriptor> out;
    for (const auto& entry : hue_table) out.push_back(SemanticDescriptor::color(entry.name));
    out.push_back(SemanticDescriptor::color(ColorName::White));
    out.push_back(SemanticDescriptor::color(ColorName::Black));
    return out;
}

std::vector<SemanticDescriptor> FeatureBank::texture_space(int image_height,
                                                           int image_width) const {
    std::vector<SemanticDescriptor> out;
    for (double scale : gabor_scales)
        for (double orientation : gabor_orientations)
            out.push_back(SemanticDescriptor::texture(
                gabor_params_for(scale, orientation, image_height, image_width)));
    return out;
}

ColorName hue_bucket(double h, double s, double v, const FeatureBank& bank) {
    if (s < bank.white_sat_max && v > bank.white_val_min) return ColorName::White;
    if (v < bank.black_val_max) return ColorName::Black;
    for (const auto& entry : bank.hue_table)
        if (entry.range.contains(h)) return entry.name;
    // Unreachable with a validated partition; guards fmod edge at exactly 360.
    return bank.hue_table.front().name;
}

ColorName pixel_bucket(std::uint8_t r, std::uint8_t g, std::uint8_t b, const FeatureBank& bank) {
    const Hsv hsv = rgb_to_hsv(r, g, b);
    return hue_bucket(hsv.h, hsv.s, hsv.v, bank);
}

namespace {

// Average-pool a source map (sh x sw) onto a grid x grid mesh using the
// integer partition src_lo = cell * src_dim / grid.
std::vector<double> pool_to_grid(const std::vector<double>& src, int sh, int sw, int grid) {
    std::vector<double> out(static_cast<std::size_t>(grid) * grid, 0.0);
    for (int gr = 0; gr < grid; ++gr) {
        const int r0 = gr * sh / grid;
        const int r1 = (gr + 1) * sh / grid;
        for (int gc = 0; gc < grid; ++gc) {
            const int c0 = gc * sw / grid;
            const int c1 = (gc + 1) * sw / grid;
            double sum = 0.0;
            for (int r = r0; r < r1; ++r)
                for (int c = c0; c < c1; ++c) sum += src[static_cast<std::size_t>(r) * sw + c];
            out[static_cast<std::size_t>(gr) * grid + gc] =
                sum / (static_cast<double>(r1 - r0) * (c1 - c0));
        }
    }
    return out;
}

void check_grid(const LabeledImage& image, int grid) {
    if (grid > std::min(image.height, image.width))
        throw ContractError("pooling grid exceeds image dimensions");
    if (static_cast<long long>(grid) * grid >= image.pixel_count())
        throw ContractError("feature dims must stay below the image pixel count");
}

}  // namespace

FeatureVector extract_color_feature(const LabeledImage& image, ColorName bucket,
                                    const FeatureBank& bank) {
    check_grid(image, bank.grid);
    std::vector<double> membership(static_cast<std::size_t>(image.height) * image.width);
    for (int r = 0; r < image.height; ++r)
        for (int c = 0; c < image.width; ++c)
            membership[static_cast<std::size_t>(r) * image.width + c] =
                pixel_bucket(image.at(r, c, 0), image.at(r, c, 1), image.at(r, c, 2), bank) == bucket
                    ? 1.0
                    : 0.0;

    FeatureVector fv;
    fv.descriptor = SemanticDescriptor::color(bucket);
    fv.values = pool_to_grid(membership, image.height, image.width, bank.grid);
    fv.dims = bank.grid * bank.grid;
    fv.extraction_cost = preprocessing_cost(fv.descriptor, image.height, image.width, bank);
    return fv;
}

FeatureVector extract_texture_feature(const LabeledImage& image, const GaborParams& params,
                                      const FeatureBank& bank) {
    check_grid(image, bank.grid);
    const int k = params.kernel_size;
    if (k > std::min(image.height, image.width))
        throw ContractError("gabor kernel larger than image");
    const int oh = image.height - k + 1;
    const int ow = image.width - k + 1;
    if (oh < bank.grid || ow < bank.grid)
        throw ContractError("gabor valid-convolution output smaller than pooling grid");

    const std::vector<double> kernel = build_gabor_kernel(params);

    std::vector<double> gray(static_cast<std::size_t>(image.height) * image.width);
    for (int r = 0; r < image.height; ++r)
        for (int c = 0; c < image.width; ++c)
            gray[static_cast<std::size_t>(r) * image.width + c] =
                (0.299 * image.at(r, c, 0) + 0.587 * image.at(r, c, 1) +
                 0.114 * image.at(r, c, 2)) /
                255.0;

    std::vector<double> response(static_cast<std::size_t>(oh) * ow, 0.0);
    double max_response = 0.0;
    for (int r = 0; r < oh; ++r) {
        for (int c = 0; c < ow; ++c) {
            double acc = 0.0;
            for (int kr = 0; kr < k; ++kr) {
                const double* grow = &gray[static_cast<std::size_t>(r + kr) * image.width + c];
                const double* krow = &kernel[static_cast<std::size_t>(kr) * k];
                for (int kc = 0; kc < k; ++kc) acc += grow[kc] * krow[kc];
            }
            const double mag = std::fabs(acc);
            response[static_cast<std::size_t>(r) * ow + c] = mag;
            max_response = std::max(max_response, mag);
        }
    }

    const double denom = std::max(max_response, 1e-12);
    FeatureVector fv;
    fv.descriptor = SemanticDescriptor::texture(params);
    fv.values = pool_to_grid(response, oh, ow, bank.grid);
    for (double& v : fv.values) v /= denom;
    fv.dims = bank.grid * bank.grid;
    fv.extraction_cost = preprocessing_cost(fv.descriptor, image.height, image.width, bank);
    return fv;
}

FeatureVector extract_feature(const LabeledImage& image, const SemanticDescriptor& descriptor,
                              const FeatureBank& bank) {
    if (descriptor.kind == SemanticDescriptor::Kind::Color)
        return extract_color_feature(image, descriptor.bucket, bank);
    return extract_texture_feature(image, descriptor.gabor, bank);
}

long long preprocessing_cost(const SemanticDescriptor& descriptor, int image_height,
                             int image_width, const FeatureBank& bank) {
    return incremental_preprocessing_cost(descriptor, image_height, image_width, bank, false);
}

long long incremental_preprocessing_cost(const SemanticDescriptor& descriptor, int image_height,
                                         int image_width, const FeatureBank& bank,
                                         bool hsv_already_charged) {
    const long long pixels = static_cast<long long>(image_height) * image_width;
    if (descriptor.kind == SemanticDescriptor::Kind::Color) {
        const long long convert = hsv_already_charged ? 0 : bank.cost_color_convert;
        return (convert + bank.cost_color_bucket_test + bank.cost_pool) * pixels;
    }
    const int k = descriptor.gabor.kernel_size;
    const long long oh = image_height - k + 1;
    const long long ow = image_width - k + 1;
    if (oh <= 0 || ow <= 0) throw ContractError("gabor kernel larger than image");
    return oh * ow * k * k + bank.cost_pool * pixels;
}

}  // namespace semdec
