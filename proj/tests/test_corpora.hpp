// Deterministic corpora for selection, cascade and sweep tests.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "semdec/cascade.hpp"
#include "semdec/dataset.hpp"
#include "semdec/mlp.hpp"
#include "semdec/rng.hpp"

namespace semdec::testing {

inline void relabel_class(std::vector<LabeledImage>& images, int from, int to) {
    for (auto& img : images)
        if (img.class_id == from) img.class_id = to;
}

// Objects are uniformly red discs; clutter discs in four other colors.
inline std::vector<LabeledImage> uniform_color_corpus(int count, int size, std::uint64_t seed) {
    SyntheticSpec spec;
    spec.count = count;
    spec.image_size = size;
    spec.palette = {"red", "green", "blue", "cyan", "magenta"};
    spec.seed = seed;
    return generate_synthetic(spec);
}

// Objects are red OR yellow discs (never both); clutter in three other
// colors. Classes 0 and 1 are merged into target class 0.
inline std::vector<LabeledImage> or_pair_corpus(int count, int size, std::uint64_t seed) {
    SyntheticSpec spec;
    spec.count = count;
    spec.image_size = size;
    spec.palette = {"red", "yellow", "green", "blue", "cyan"};
    spec.seed = seed;
    auto images = generate_synthetic(spec);
    relabel_class(images, 1, 0);
    return images;
}

// Class is coded purely by disc position (left vs right); global color
// statistics match across classes, so grid-1 color features carry no signal
// while raw RGB separates the classes linearly. 30% objects (class 0).
inline std::vector<LabeledImage> no_signal_corpus(int count, int size, std::uint64_t seed) {
    std::vector<LabeledImage> images;
    images.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        Rng rng(derive_seed(seed, 0x6e736967ull + static_cast<std::uint64_t>(i)));
        LabeledImage img = make_image(size, size);
        img.class_id = i % 10 < 3 ? 0 : 1;
        for (auto& byte : img.pixels) byte = static_cast<std::uint8_t>(rng.below(46));
        const double cx = (img.class_id == 0 ? 0.25 : 0.75) * size;
        const double cy = rng.uniform(0.45, 0.55) * size;
        const double radius = rng.uniform(0.16, 0.20) * size;
        for (int r = 0; r < size; ++r)
            for (int c = 0; c < size; ++c) {
                const double dx = c + 0.5 - cx;
                const double dy = r + 0.5 - cy;
                if (dx * dx + dy * dy <= radius * radius) {
                    img.at(r, c, 0) = 255;
                    img.at(r, c, 1) = 255;
                    img.at(r, c, 2) = 255;
                }
            }
        images.push_back(std::move(img));
    }
    return images;
}

// Red discs at quadrant centers; objects (60%) sit top-left or bottom-right,
// clutter top-right or bottom-left. The XOR over quadrants is not linearly
// separable from pooled color maps, so a 1-hidden-unit leaf cannot learn it
// while wider leaves can.
inline std::vector<LabeledImage> xor_position_corpus(int count, int size, std::uint64_t seed) {
    std::vector<LabeledImage> images;
    images.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        Rng rng(derive_seed(seed, 0x786f72ull + static_cast<std::uint64_t>(i)));
        LabeledImage img = make_image(size, size);
        const bool object = i % 10 < 6;
        img.class_id = object ? 0 : 1;
        for (auto& byte : img.pixels) byte = static_cast<std::uint8_t>(rng.below(46));
        const bool first_corner = i % 2 == 0;
        double cx, cy;
        if (object) {
            cx = (first_corner ? 0.25 : 0.75) * size;
            cy = (first_corner ? 0.25 : 0.75) * size;
        } else {
            cx = (first_corner ? 0.75 : 0.25) * size;
            cy = (first_corner ? 0.25 : 0.75) * size;
        }
        const double radius = rng.uniform(0.16, 0.20) * size;
        for (int r = 0; r < size; ++r)
            for (int c = 0; c < size; ++c) {
                const double dx = c + 0.5 - cx;
                const double dy = r + 0.5 - cy;
                if (dx * dx + dy * dy <= radius * radius) {
                    img.at(r, c, 0) = 255;
                    img.at(r, c, 1) = 0;
                    img.at(r, c, 2) = 0;
                }
            }
        images.push_back(std::move(img));
    }
    return images;
}

// Color and texture carry independent signal: discs over gratings, classes
// (red,0deg) (red,90deg) (green,0deg) (green,90deg). Target class 0.
inline std::vector<LabeledImage> combo_corpus(int count, int size, std::uint64_t seed) {
    SyntheticSpec spec;
    spec.count = count;
    spec.image_size = size;
    spec.palette = {"red", "green"};
    spec.orientations = {0.0, 90.0};
    spec.seed = seed;
    return generate_synthetic(spec);
}

inline MlpClassifier train_test_baseline(const DetectionTask& task, int hidden,
                                         const TrainConfig& config) {
    std::vector<TrainingExample> examples;
    examples.reserve(task.train_set.size());
    for (const auto& img : task.train_set)
        examples.push_back({flatten_rgb(img),
                            img.detection_label == DetectionLabel::ObjectOfInterest ? 1.0 : 0.0});
    const int d_in = 3 * task.train_set.front().height * task.train_set.front().width;
    return train_classifier(d_in, hidden, examples, config);
}

inline FeatureBank bank_with_grid(int grid) {
    FeatureBank bank;
    bank.grid = grid;
    return bank;
}

}  // namespace semdec::testing
