#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "semdec/features.hpp"
#include "semdec/image.hpp"
#include "semdec/mlp.hpp"

namespace semdec {

// One (descriptor, small classifier) pair of the first stage.
struct Leaf {
    SemanticDescriptor descriptor;
    MlpClassifier classifier;
};

// A clause is a single leaf or an OR of two leaves; clauses combine by AND.
struct Clause {
    Leaf first;
    std::optional<Leaf> second;

    bool is_or_pair() const { return second.has_value(); }
};

// Exactly two levels: AND over {leaf | leaf OR leaf}. Never deeper.
struct StageExpr {
    std::vector<Clause> clauses;

    bool empty() const { return clauses.empty(); }
    std::size_t leaf_count() const;
    std::vector<std::string> descriptor_keys() const;
    // "(red+yellow).blue" style rendering, OR as '+', AND as '.'.
    std::string to_string() const;
    void validate() const;  // throws ContractError on duplicate descriptors
};

// Leaf pass convention: score >= delta (ties pass), so delta = 0 is the
// exact always-open gate.
bool eval_expr(const StageExpr& expr, const std::map<std::string, double>& scores, double delta);

// Worst-case per-input cost of a first stage: every leaf evaluated, the HSV
// pass charged once across color leaves.
long long stage_worst_case_macs(const StageExpr& expr, int input_height, int input_width,
                                const FeatureBank& bank);

enum class EvalMode {
    ShortCircuit,    // stop extracting once a clause fails / an OR arm passes
    FullAccounting,  // evaluate every leaf of every clause
};

struct MacBreakdown {
    long long preprocessing = 0;
    long long first_stage = 0;
    long long second_stage = 0;

    long long total() const { return preprocessing + first_stage + second_stage; }
};

struct CascadeResult {
    DetectionLabel label = DetectionLabel::Clutter;
    bool second_stage_enabled = false;
    long long macs_total = 0;
    MacBreakdown macs_breakdown;
};

struct Metrics {
    double accuracy = 0.0;
    double avg_macs_per_input = 0.0;
    double clutter_pass_fraction = 0.0;
    double object_pass_fraction = 0.0;
    double pass_fraction_overall = 0.0;
    double avg_preprocessing_macs = 0.0;
    double avg_first_stage_macs = 0.0;
    double avg_second_stage_macs = 0.0;
    long long n_inputs = 0;
};

// Memoizes feature extraction per (descriptor, image id). Purely a speed
// cache: values and accounting are identical with or without it. Not
// thread-safe; meant for the sequential selection loop.
class FeatureCache {
public:
    const FeatureVector& get_or_extract(const LabeledImage& image, std::uint64_t image_id,
                                        const SemanticDescriptor& descriptor,
                                        const FeatureBank& bank);
    void insert(std::uint64_t image_id, const SemanticDescriptor& descriptor, FeatureVector fv);
    std::size_t size() const { return cache_.size(); }

private:
    std::unordered_map<std::string, FeatureVector> cache_;
};

class Hierarchy {
public:
    // Validates structure, leaf dims against the bank grid, and the stage
    // ordering invariant (worst-case first-stage cost below the final
    // classifier's MACs). Clauses are normalized cheapest-preprocessing-first.
    Hierarchy(StageExpr first_stage, double delta, MlpClassifier final_net, double final_threshold,
              FeatureBank bank, int input_height, int input_width,
              EvalMode mode = EvalMode::ShortCircuit);

    const StageExpr& first_stage() const { return first_stage_; }
    double delta() const { return delta_; }
    void set_delta(double delta);
    const MlpClassifier& final_net() const { return final_net_; }
    double final_threshold() const { return final_threshold_; }
    const FeatureBank& bank() const { return bank_; }
    int input_height() const { return input_height_; }
    int input_width() const { return input_width_; }
    EvalMode eval_mode() const { return mode_; }
    void set_eval_mode(EvalMode mode) { mode_ = mode; }

    // Worst-case per-input first-stage cost: every leaf evaluated, the HSV
    // pass shared once across color leaves.
    long long first_stage_worst_case_macs() const;

    CascadeResult classify(const LabeledImage& image, FeatureCache* cache = nullptr,
                           std::uint64_t image_id = 0) const;
    Metrics evaluate(const std::vector<LabeledImage>& test_set,
                     FeatureCache* cache = nullptr) const;

    std::string serialize() const;
    static Hierarchy deserialize(const std::string& text);

private:
    StageExpr first_stage_;
    double delta_;
    MlpClassifier final_net_;
    double final_threshold_;
    FeatureBank bank_;
    int input_height_;
    int input_width_;
    EvalMode mode_;
};

// Final-classifier input convention: RGB flattened row-major (interleaved
// channels) to [0,1] by dividing by 255.
std::vector<double> flatten_rgb(const LabeledImage& image);

// Plain single-classifier accuracy of `net` on raw RGB at `threshold`.
double baseline_accuracy(const MlpClassifier& net, const std::vector<LabeledImage>& test_set,
                         double threshold);

void save_hierarchy(const Hierarchy& h, const std::filesystem::path& file);
Hierarchy load_hierarchy(const std::filesystem::path& file);

}  // namespace semdec
