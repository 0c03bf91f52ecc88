#include "semdec/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "semdec/errors.hpp"
#include "semdec/features.hpp"
#include "semdec/rng.hpp"

namespace semdec {

namespace {

constexpr std::size_t kCifarRecordBytes = 3073;
constexpr int kCifarDim = 32;
constexpr double kPi = 3.14159265358979323846;

// RNG stream tags
constexpr std::uint64_t kStreamSplit = 0x73706c6974ull;      // task split
constexpr std::uint64_t kStreamResample = 0x7265736d70ull;   // test resample
constexpr std::uint64_t kStreamOrder = 0x6f726465ull;        // test order

std::vector<LabeledImage> load_cifar10_file(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw DataError("cannot open CIFAR batch: " + file.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    if (bytes.size() % kCifarRecordBytes != 0)
        throw DataError(file.string() + ": size " + std::to_string(bytes.size()) +
                        " is not a multiple of 3073");

    const std::size_t n = bytes.size() / kCifarRecordBytes;
    std::vector<LabeledImage> images;
    images.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint8_t* rec = bytes.data() + i * kCifarRecordBytes;
        if (rec[0] > 9)
            throw DataError(file.string() + ": record " + std::to_string(i) + " has label byte " +
                            std::to_string(rec[0]));
        LabeledImage img = make_image(kCifarDim, kCifarDim);
        img.class_id = rec[0];
        const std::uint8_t* planes = rec + 1;
        for (int ch = 0; ch < 3; ++ch)
            for (int r = 0; r < kCifarDim; ++r)
                for (int c = 0; c < kCifarDim; ++c)
                    img.at(r, c, ch) = planes[ch * 1024 + r * kCifarDim + c];
        images.push_back(std::move(img));
    }
    return images;
}

}  // namespace

std::vector<LabeledImage> load_cifar10(const std::filesystem::path& path) {
    if (std::filesystem::is_regular_file(path)) return load_cifar10_file(path);
    if (!std::filesystem::is_directory(path))
        throw DataError("CIFAR path is neither a file nor a directory: " + path.string());

    std::vector<std::filesystem::path> files;
    static const char* kStandardNames[] = {"data_batch_1.bin", "data_batch_2.bin",
                                           "data_batch_3.bin", "data_batch_4.bin",
                                           "data_batch_5.bin", "test_batch.bin"};
    for (const char* name : kStandardNames) {
        const auto candidate = path / name;
        if (std::filesystem::is_regular_file(candidate)) files.push_back(candidate);
    }
    if (files.empty()) {
        for (const auto& entry : std::filesystem::directory_iterator(path))
            if (entry.is_regular_file() && entry.path().extension() == ".bin")
                files.push_back(entry.path());
        std::sort(files.begin(), files.end());
    }
    if (files.empty()) throw DataError("no .bin batches found under " + path.string());

    std::vector<LabeledImage> images;
    for (const auto& file : files) {
        auto batch = load_cifar10_file(file);
        images.insert(images.end(), std::make_move_iterator(batch.begin()),
                      std::make_move_iterator(batch.end()));
    }
    return images;
}

std::vector<std::uint8_t> cifar10_record_bytes(const LabeledImage& image) {
    if (image.height != kCifarDim || image.width != kCifarDim)
        throw ContractError("CIFAR records are 32x32, got " + std::to_string(image.height) + "x" +
                            std::to_string(image.width));
    if (image.class_id < 0 || image.class_id > 9)
        throw ContractError("CIFAR label must be in [0,9], got " + std::to_string(image.class_id));
    std::vector<std::uint8_t> rec(kCifarRecordBytes);
    rec[0] = static_cast<std::uint8_t>(image.class_id);
    for (int ch = 0; ch < 3; ++ch)
        for (int r = 0; r < kCifarDim; ++r)
            for (int c = 0; c < kCifarDim; ++c)
                rec[1 + ch * 1024 + r * kCifarDim + c] = image.at(r, c, ch);
    return rec;
}

void write_cifar10(const std::vector<LabeledImage>& images, const std::filesystem::path& file) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw DataError("cannot write CIFAR batch: " + file.string());
    for (const auto& img : images) {
        const auto rec = cifar10_record_bytes(img);
        out.write(reinterpret_cast<const char*>(rec.data()),
                  static_cast<std::streamsize>(rec.size()));
    }
    if (!out) throw DataError("short write to " + file.string());
}

SyntheticSpec SyntheticSpec::from_config(const KeyValueConfig& cfg) {
    SyntheticSpec spec;
    spec.count = cfg.get_int("count", spec.count);
    spec.image_size = cfg.get_int("size", spec.image_size);
    spec.palette = cfg.get_string_list("palette", spec.palette);
    spec.orientations = cfg.get_double_list("orientations", spec.orientations);
    spec.seed = cfg.get_u64("seed", spec.seed);
    spec.grating_wavelength = cfg.get_double("grating_wavelength", spec.grating_wavelength);
    return spec;
}

int SyntheticSpec::variant_count() const {
    if (!palette.empty() && !orientations.empty())
        return static_cast<int>(palette.size() * orientations.size());
    return static_cast<int>(palette.size() + orientations.size());
}

void palette_rgb(const std::string& name, std::uint8_t& r, std::uint8_t& g, std::uint8_t& b) {
    const ColorName color = color_name_from_string(name);
    if (color == ColorName::White) {
        r = g = b = 255;
        return;
    }
    if (color == ColorName::Black) {
        r = g = b = 20;
        return;
    }
    // Chromatic buckets are centered on multiples of 45 degrees.
    const double hue = 45.0 * static_cast<int>(color);
    hsv_to_rgb(hue, 1.0, 1.0, r, g, b);
}

namespace {

void render_grating_background(LabeledImage& img, double orientation_deg, double wavelength,
                               double phase) {
    const double theta = orientation_deg * kPi / 180.0;
    const double cos_t = std::cos(theta);
    const double sin_t = std::sin(theta);
    for (int r = 0; r < img.height; ++r) {
        for (int c = 0; c < img.width; ++c) {
            const double carrier = std::sin(2.0 * kPi * (c * cos_t + r * sin_t) / wavelength + phase);
            const double value = 127.5 * (1.0 + 0.8 * carrier);
            const auto byte = static_cast<std::uint8_t>(std::llround(std::clamp(value, 0.0, 255.0)));
            img.at(r, c, 0) = byte;
            img.at(r, c, 1) = byte;
            img.at(r, c, 2) = byte;
        }
    }
}

void render_noise_background(LabeledImage& img, Rng& rng) {
    // Dark noise: value stays below the black threshold, so backgrounds land
    // in the Black bucket.
    for (auto& byte : img.pixels) byte = static_cast<std::uint8_t>(rng.below(46));
}

void render_disc(LabeledImage& img, const std::string& color, Rng& rng) {
    std::uint8_t r8, g8, b8;
    palette_rgb(color, r8, g8, b8);
    const double size = img.width;
    const double cx = rng.uniform(0.45, 0.55) * size;
    const double cy = rng.uniform(0.45, 0.55) * size;
    const double radius = rng.uniform(0.36, 0.40) * size;
    const double r2 = radius * radius;
    for (int r = 0; r < img.height; ++r) {
        for (int c = 0; c < img.width; ++c) {
            const double dx = c + 0.5 - cx;
            const double dy = r + 0.5 - cy;
            if (dx * dx + dy * dy <= r2) {
                img.at(r, c, 0) = r8;
                img.at(r, c, 1) = g8;
                img.at(r, c, 2) = b8;
            }
        }
    }
}

}  // namespace

std::vector<LabeledImage> generate_synthetic(const SyntheticSpec& spec) {
    if (spec.image_size < 8)
        throw ConfigError("synthetic image size must be >= 8, got " +
                          std::to_string(spec.image_size));
    if (spec.count < 1) throw ConfigError("synthetic count must be >= 1");
    const int variants = spec.variant_count();
    if (variants == 0) throw ConfigError("synthetic spec needs a palette and/or orientations");
    const double wavelength =
        spec.grating_wavelength > 0 ? spec.grating_wavelength : spec.image_size / 4.0;

    const bool cross = !spec.palette.empty() && !spec.orientations.empty();
    std::vector<LabeledImage> images;
    images.reserve(static_cast<std::size_t>(spec.count));
    for (int i = 0; i < spec.count; ++i) {
        const int variant = i % variants;
        Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(i)));
        LabeledImage img = make_image(spec.image_size, spec.image_size);
        img.class_id = variant;

        if (cross) {
            const int n_orient = static_cast<int>(spec.orientations.size());
            const int palette_idx = variant / n_orient;
            const int orient_idx = variant % n_orient;
            render_grating_background(img, spec.orientations[orient_idx], wavelength,
                                      rng.uniform(0.0, 2.0 * kPi));
            render_disc(img, spec.palette[palette_idx], rng);
        } else if (!spec.palette.empty()) {
            render_noise_background(img, rng);
            render_disc(img, spec.palette[variant], rng);
        } else {
            render_grating_background(img, spec.orientations[variant], wavelength,
                                      rng.uniform(0.0, 2.0 * kPi));
        }
        images.push_back(std::move(img));
    }
    return images;
}

double measured_clutter_fraction(const std::vector<LabeledImage>& set) {
    if (set.empty()) throw ContractError("empty set has no clutter fraction");
    long long clutter = 0;
    for (const auto& img : set)
        if (img.detection_label == DetectionLabel::Clutter) ++clutter;
    return static_cast<double>(clutter) / static_cast<double>(set.size());
}

namespace {

std::vector<std::size_t> sample_indices(const std::vector<std::size_t>& pool, std::size_t want,
                                        Rng& rng) {
    std::vector<std::size_t> out;
    out.reserve(want);
    if (pool.size() >= want) {
        std::vector<std::size_t> shuffled = pool;
        rng.shuffle(shuffled);
        out.assign(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(want));
    } else {
        for (std::size_t i = 0; i < want; ++i)
            out.push_back(pool[rng.below(pool.size())]);
    }
    return out;
}

}  // namespace

DetectionTask make_detection_task(const std::vector<LabeledImage>& images, int target_class,
                                  double clutter_fraction, std::uint64_t seed,
                                  const TaskOptions& options) {
    if (clutter_fraction < 0.05 || clutter_fraction > 0.95)
        throw ContractError("clutter_fraction must lie in [0.05, 0.95]");
    if (options.train_fraction <= 0.0 || options.train_fraction >= 1.0)
        throw ContractError("train_fraction must lie in (0, 1)");

    std::vector<std::size_t> object_idx, clutter_idx;
    for (std::size_t i = 0; i < images.size(); ++i)
        (images[i].class_id == target_class ? object_idx : clutter_idx).push_back(i);
    if (object_idx.empty())
        throw ContractError("no instances of target class " + std::to_string(target_class));
    if (clutter_idx.empty())
        throw ContractError("no non-target instances to serve as clutter");
    if (object_idx.size() < 2 || clutter_idx.size() < 2)
        throw ContractError("need at least 2 instances per side to split train/test");

    Rng split_rng(derive_seed(seed, kStreamSplit));
    auto split_group = [&](std::vector<std::size_t>& group, std::vector<std::size_t>& train,
                           std::vector<std::size_t>& test) {
        split_rng.shuffle(group);
        auto n_train = static_cast<std::size_t>(
            std::llround(options.train_fraction * static_cast<double>(group.size())));
        n_train = std::clamp<std::size_t>(n_train, 1, group.size() - 1);
        train.assign(group.begin(), group.begin() + static_cast<std::ptrdiff_t>(n_train));
        test.assign(group.begin() + static_cast<std::ptrdiff_t>(n_train), group.end());
    };

    std::vector<std::size_t> train_obj, test_obj_pool, train_clu, test_clu_pool;
    split_group(object_idx, train_obj, test_obj_pool);
    split_group(clutter_idx, train_clu, test_clu_pool);

    const std::size_t n_test = options.test_size > 0
                                   ? static_cast<std::size_t>(options.test_size)
                                   : test_obj_pool.size() + test_clu_pool.size();
    if (n_test < 2) throw ContractError("test set must hold at least 2 items");
    auto n_clutter = static_cast<std::size_t>(
        std::llround(clutter_fraction * static_cast<double>(n_test)));
    n_clutter = std::clamp<std::size_t>(n_clutter, 1, n_test - 1);  // keep both labels present

    Rng resample_rng(derive_seed(seed, kStreamResample));
    const auto chosen_clutter = sample_indices(test_clu_pool, n_clutter, resample_rng);
    const auto chosen_objects = sample_indices(test_obj_pool, n_test - n_clutter, resample_rng);

    DetectionTask task;
    task.target_class = target_class;
    task.clutter_fraction = clutter_fraction;
    task.seed = seed;

    auto labeled = [&](std::size_t idx) {
        LabeledImage img = images[idx];
        img.detection_label = img.class_id == target_class ? DetectionLabel::ObjectOfInterest
                                                           : DetectionLabel::Clutter;
        return img;
    };
    for (auto idx : train_obj) task.train_set.push_back(labeled(idx));
    for (auto idx : train_clu) task.train_set.push_back(labeled(idx));
    for (auto idx : chosen_objects) task.test_set.push_back(labeled(idx));
    for (auto idx : chosen_clutter) task.test_set.push_back(labeled(idx));

    Rng order_rng(derive_seed(seed, kStreamOrder));
    order_rng.shuffle(task.train_set);
    order_rng.shuffle(task.test_set);
    return task;
}

}  // namespace semdec
