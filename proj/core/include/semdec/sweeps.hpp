#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "semdec/cascade.hpp"
#include "semdec/config.hpp"
#include "semdec/dataset.hpp"
#include "semdec/selection.hpp"

namespace semdec {

// Everything a harness run needs, overridable from a key=value config file
// and CLI flags. See README for the key list.
struct RunConfig {
    // data
    std::string data_path;
    int target_class = 0;
    double clutter_fraction = 0.75;
    std::uint64_t seed = 1;
    double train_fraction = 0.8;
    int test_size = 0;
    int pool_limit = 0;  // 0 = use the whole corpus

    // features
    FeatureBank bank;

    // classifiers
    int final_hidden = 128;
    TrainConfig final_train{0.2, 30, 32, 1, 0.02};
    int leaf_hidden = 16;
    TrainConfig leaf_train{0.5, 60, 16, 1, 0.3};

    // selection
    double epsilon = 0.02;
    double delta = -1.0;  // <0 = auto: 0.4 synthetic, 0.55 CIFAR
    int k_color = 4;
    int k_texture = 5;
    double validation_fraction = 0.2;
    double initial_gain_floor = 0.0;
    double final_threshold = 0.5;
    bool use_color = true;
    bool use_texture = true;
    bool parallel = true;

    // sweep grids
    std::vector<double> clutter_fractions = {0.6, 0.75, 0.9};
    std::vector<double> deltas = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7};
    std::vector<int> hidden_sizes = {2, 4, 8, 16, 32};
    std::vector<double> comparison_fractions;  // empty = {clutter_fraction}

    void apply_config(const KeyValueConfig& cfg);
    std::map<std::string, std::string> snapshot() const;
};

struct LoadedData {
    std::vector<LabeledImage> pool;
    bool is_cifar = false;
};

// data_path resolution: a directory or a *.bin file is a CIFAR batch source,
// anything else is parsed as a synthetic-spec key=value file.
LoadedData load_data(const RunConfig& cfg);

struct TrainedStack {
    RunConfig cfg;  // with delta resolved
    std::vector<LabeledImage> pool;
    DetectionTask task;
    MlpClassifier baseline;
    TrainOutcome outcome;
    double wall_train_s = 0.0;
};

// Load data, build the base task, train the baseline classifier and the
// hierarchy (Algorithm-style selection on color and texture spaces).
TrainedStack train_stack(const RunConfig& cfg);

struct SweepRow {
    std::string label;
    double value = 0.0;
    bool has_value = true;  // baseline rows carry no sweep value
    double avg_macs_per_input = 0.0;
    double normalized_ops = 0.0;        // baseline avg_macs / row avg_macs
    double accuracy = 0.0;
    double baseline_accuracy = 0.0;     // single classifier on the same test set
    double normalized_accuracy = 0.0;   // accuracy / baseline_accuracy
    double clutter_pass_fraction = 0.0;
    double object_pass_fraction = 0.0;
    bool is_argmin = false;             // lowest avg_macs among non-baseline rows
    double wall_train_s = 0.0;          // JSON sidecar only
    double wall_test_s = 0.0;           // JSON sidecar only
};

struct SweepReport {
    std::string sweep_name;
    std::uint64_t seed = 0;
    std::map<std::string, std::string> config_snapshot;
    double total_train_wall_s = 0.0;
    std::vector<SweepRow> rows;

    // Deterministic body: wall-clock columns are deliberately excluded so two
    // runs with equal seeds emit identical bytes. Full rows (with times) go
    // to the JSON sidecar.
    std::string to_csv() const;
    std::string to_json() const;
};

// Writes <name>.csv and <name>.json under out_dir, creating it if needed.
void write_report(const SweepReport& report, const std::filesystem::path& out_dir);

SweepReport run_clutter_sweep(const TrainedStack& stack, const std::vector<double>& fractions);
SweepReport run_delta_sweep(const TrainedStack& stack, const std::vector<double>& deltas);
SweepReport run_complexity_sweep(const TrainedStack& stack, const std::vector<int>& hidden_sizes);
SweepReport run_stage_comparison(const TrainedStack& stack, const std::vector<double>& fractions);

// Single-point evaluation of an existing hierarchy, reported in sweep form.
SweepReport evaluate_report(const Hierarchy& h, const DetectionTask& task,
                            const RunConfig& cfg);

// JSON audit + gain document for a training run (one record per candidate).
std::string train_report_json(const TrainedStack& stack);

}  // namespace semdec
