#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "semdec/cascade.hpp"
#include "semdec/dataset.hpp"
#include "semdec/features.hpp"
#include "semdec/mlp.hpp"

namespace semdec {

// Bookkeeping for the gain model:
//   gain = n_orig - [n_initial + (1 - f) * n_orig]
// where n_orig is the final classifier's per-input MACs, n_initial the
// average per-input first-stage cost actually spent (preprocessing +
// evaluated leaves) and f the fraction of inputs filtered out at stage one.
struct GainReport {
    double n_orig = 0.0;
    double n_initial = 0.0;
    double f = 0.0;
    double gain = 0.0;
    double q_baseline = 0.0;
    double q_hier = 0.0;
};

// The only way to build a report; gain always satisfies the identity.
GainReport make_gain_report(double n_orig, double n_initial, double f, double q_baseline,
                            double q_hier);

GainReport measure_gain(const Hierarchy& h, const std::vector<LabeledImage>& eval_set,
                        FeatureCache* cache = nullptr);

struct SelectionConfig {
    double epsilon = 0.02;          // max allowed accuracy drop Q - Q'
    int k = 4;                      // top-k pool for the pairwise OR phase
    double initial_gain_floor = 0.0;
    double delta = 0.5;             // activation threshold used during search
    std::vector<SemanticDescriptor> search_space;

    // plumbing
    int leaf_hidden = 16;
    TrainConfig leaf_train;
    double validation_fraction = 0.2;
    double final_threshold = 0.5;
    bool parallel_leaf_training = true;
};

struct CandidateRecord {
    std::string phase;        // "single", "pair" or "warning"
    std::string expression;   // the candidate first stage tried
    std::vector<std::string> descriptor_keys;  // descriptors added by this candidate
    double q_hier = 0.0;
    double gain = 0.0;
    bool admitted = false;
    std::string note;
};

struct SelectionResult {
    StageExpr expr;
    std::vector<CandidateRecord> audit;
    double q_baseline = 0.0;
    GainReport report;  // of the selected stage on the validation fold
};

// Stratified holdout split on detection labels; both folds keep both labels.
void split_holdout(const std::vector<LabeledImage>& images, double validation_fraction,
                   std::uint64_t seed, std::vector<LabeledImage>& fit,
                   std::vector<LabeledImage>& val);

// Trains one leaf classifier per descriptor over a fixed fit/val split and
// caches it together with its standalone validation accuracy and the val-set
// features. Candidate training is independent per descriptor, so prefetching
// may run leaves in parallel; results do not depend on scheduling.
class LeafBank {
public:
    LeafBank(std::vector<LabeledImage> fit_set, std::vector<LabeledImage> val_set,
             const FeatureBank& bank, int leaf_hidden, const TrainConfig& leaf_train);

    const Leaf& leaf(const SemanticDescriptor& descriptor);
    double leaf_accuracy(const SemanticDescriptor& descriptor);
    void prefetch(const std::vector<SemanticDescriptor>& space, bool parallel);

    const std::vector<LabeledImage>& fit_set() const { return fit_set_; }
    const std::vector<LabeledImage>& val_set() const { return val_set_; }
    FeatureCache& val_cache() { return val_cache_; }
    int input_height() const { return fit_set_.front().height; }
    int input_width() const { return fit_set_.front().width; }

private:
    struct Entry {
        Leaf leaf;
        double val_accuracy = 0.0;
    };
    Entry train_entry(const SemanticDescriptor& descriptor,
                      std::vector<FeatureVector>* val_features) const;
    Entry& ensure(const SemanticDescriptor& descriptor);

    std::vector<LabeledImage> fit_set_;
    std::vector<LabeledImage> val_set_;
    FeatureBank bank_;
    int leaf_hidden_;
    TrainConfig leaf_train_;
    FeatureCache val_cache_;
    std::unordered_map<std::string, Entry> entries_;
};

// Greedy optimal-semantic selection with 2-level OR-AND construction.
// Phase 1 tries each descriptor as an AND clause; phase 2 repeatedly ranks
// the remaining leaves, takes the top k and tries all OR pairs ANDed onto
// the incumbent, restarting after each admission until a full pass admits
// nothing. Admission requires Q - Q' < epsilon and a strict gain improvement.
SelectionResult select_semantics(const MlpClassifier& baseline,
                                 const std::vector<LabeledImage>& train_images,
                                 const SelectionConfig& config, const FeatureBank& bank);

// Shared-folds variant used by train_hierarchy and the oracle tests.
SelectionResult select_semantics_on(const MlpClassifier& baseline, LeafBank& leaves,
                                    const SelectionConfig& config, const FeatureBank& bank);

struct OracleResult {
    StageExpr expr;
    double gain = 0.0;
    double q_hier = 0.0;
    std::size_t candidates_examined = 0;
};

// Enumerates every 2-level OR-AND expression over a search space of at most
// 6 descriptors, returns the max-gain expression satisfying the quality
// constraint. Ties resolve toward fewer leaves, then fewer clauses, then
// descriptor order.
OracleResult exhaustive_oracle(const MlpClassifier& baseline,
                               const std::vector<LabeledImage>& train_images,
                               const SelectionConfig& config, const FeatureBank& bank);
OracleResult exhaustive_oracle_on(const MlpClassifier& baseline, LeafBank& leaves,
                                  const SelectionConfig& config, const FeatureBank& bank);

struct TrainOutcome {
    Hierarchy hierarchy;
    SelectionResult color_selection;
    SelectionResult texture_selection;
    GainReport gain_color;
    GainReport gain_texture;
    GainReport gain_combo;
    std::string winner;  // "color", "texture", "combo" or "empty"
    bool first_stage_empty = false;
};

// Runs selection on the color and texture spaces over one shared holdout,
// forms the combined AND stage, measures all three gains and installs the
// max-gain stage (no quality re-check for the combination). Ties resolve
// toward color, then texture, then combo.
TrainOutcome train_hierarchy(const MlpClassifier& baseline,
                             const std::vector<LabeledImage>& train_images,
                             const SelectionConfig& color_config,
                             const SelectionConfig& texture_config, const FeatureBank& bank);

}  // namespace semdec
