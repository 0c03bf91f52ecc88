#include "semdec/selection.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <set>

#include "semdec/errors.hpp"
#include "semdec/rng.hpp"

namespace semdec {

namespace {

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

void check_uniform_dims(const std::vector<LabeledImage>& images) {
    for (const auto& img : images)
        if (img.height != images.front().height || img.width != images.front().width)
            throw ContractError("selection requires uniform image dimensions");
}

}  // namespace

GainReport make_gain_report(double n_orig, double n_initial, double f, double q_baseline,
                            double q_hier) {
    GainReport r;
    r.n_orig = n_orig;
    r.n_initial = n_initial;
    r.f = f;
    r.gain = n_orig - (n_initial + (1.0 - f) * n_orig);
    r.q_baseline = q_baseline;
    r.q_hier = q_hier;
    return r;
}

GainReport measure_gain(const Hierarchy& h, const std::vector<LabeledImage>& eval_set,
                        FeatureCache* cache) {
    const Metrics metrics = h.evaluate(eval_set, cache);
    const auto n_orig = static_cast<double>(h.final_net().macs_per_inference());
    const double n_initial = metrics.avg_preprocessing_macs + metrics.avg_first_stage_macs;
    const double f = 1.0 - metrics.pass_fraction_overall;
    const double q_baseline = baseline_accuracy(h.final_net(), eval_set, h.final_threshold());
    return make_gain_report(n_orig, n_initial, f, q_baseline, metrics.accuracy);
}

void split_holdout(const std::vector<LabeledImage>& images, double validation_fraction,
                   std::uint64_t seed, std::vector<LabeledImage>& fit,
                   std::vector<LabeledImage>& val) {
    if (validation_fraction <= 0.0 || validation_fraction >= 1.0)
        throw ContractError("validation_fraction must lie in (0, 1)");
    std::vector<std::size_t> objects, clutter;
    for (std::size_t i = 0; i < images.size(); ++i) {
        switch (images[i].detection_label) {
            case DetectionLabel::ObjectOfInterest: objects.push_back(i); break;
            case DetectionLabel::Clutter: clutter.push_back(i); break;
            case DetectionLabel::Unset:
                throw ContractError("holdout split needs detection labels");
        }
    }
    if (objects.size() < 2 || clutter.size() < 2)
        throw ContractError("holdout split needs at least 2 instances per label");

    fit.clear();
    val.clear();
    Rng rng(derive_seed(seed, 0x686f6c64ull));
    for (auto* group : {&objects, &clutter}) {
        rng.shuffle(*group);
        auto n_val = static_cast<std::size_t>(
            std::llround(validation_fraction * static_cast<double>(group->size())));
        n_val = std::clamp<std::size_t>(n_val, 1, group->size() - 1);
        for (std::size_t i = 0; i < group->size(); ++i)
            (i < n_val ? val : fit).push_back(images[(*group)[i]]);
    }
}

// ---------------------------------------------------------------------------
// LeafBank

LeafBank::LeafBank(std::vector<LabeledImage> fit_set, std::vector<LabeledImage> val_set,
                   const FeatureBank& bank, int leaf_hidden, const TrainConfig& leaf_train)
    : fit_set_(std::move(fit_set)),
      val_set_(std::move(val_set)),
      bank_(bank),
      leaf_hidden_(leaf_hidden),
      leaf_train_(leaf_train) {
    if (fit_set_.empty() || val_set_.empty())
        throw ContractError("leaf bank needs nonempty fit and validation folds");
    check_uniform_dims(fit_set_);
    check_uniform_dims(val_set_);
}

LeafBank::Entry LeafBank::train_entry(const SemanticDescriptor& descriptor,
                                      std::vector<FeatureVector>* val_features) const {
    std::vector<TrainingExample> examples;
    examples.reserve(fit_set_.size());
    for (const auto& img : fit_set_) {
        TrainingExample ex;
        ex.input = extract_feature(img, descriptor, bank_).values;
        ex.target = img.detection_label == DetectionLabel::ObjectOfInterest ? 1.0 : 0.0;
        examples.push_back(std::move(ex));
    }

    TrainConfig cfg = leaf_train_;
    cfg.seed = derive_seed(leaf_train_.seed, fnv1a(descriptor.key()));

    Entry entry;
    entry.leaf.descriptor = descriptor;
    entry.leaf.classifier =
        train_classifier(bank_.grid * bank_.grid, leaf_hidden_, examples, cfg);

    long long correct = 0;
    val_features->clear();
    val_features->reserve(val_set_.size());
    for (const auto& img : val_set_) {
        FeatureVector fv = extract_feature(img, descriptor, bank_);
        const bool object = entry.leaf.classifier.score(fv.values) >= 0.5;
        const bool truth = img.detection_label == DetectionLabel::ObjectOfInterest;
        correct += object == truth ? 1 : 0;
        val_features->push_back(std::move(fv));
    }
    entry.val_accuracy = static_cast<double>(correct) / static_cast<double>(val_set_.size());
    return entry;
}

LeafBank::Entry& LeafBank::ensure(const SemanticDescriptor& descriptor) {
    const std::string key = descriptor.key();
    auto it = entries_.find(key);
    if (it == entries_.end()) {
        std::vector<FeatureVector> val_features;
        Entry entry = train_entry(descriptor, &val_features);
        for (std::size_t i = 0; i < val_features.size(); ++i)
            val_cache_.insert(static_cast<std::uint64_t>(i), descriptor,
                              std::move(val_features[i]));
        it = entries_.emplace(key, std::move(entry)).first;
    }
    return it->second;
}

void LeafBank::prefetch(const std::vector<SemanticDescriptor>& space, bool parallel) {
    std::vector<SemanticDescriptor> missing;
    for (const auto& d : space)
        if (entries_.find(d.key()) == entries_.end()) missing.push_back(d);
    if (missing.empty()) return;

    if (!parallel || missing.size() == 1) {
        for (const auto& d : missing) ensure(d);
        return;
    }
    struct Trained {
        Entry entry;
        std::vector<FeatureVector> val_features;
    };
    std::vector<std::future<Trained>> futures;
    futures.reserve(missing.size());
    for (const auto& d : missing)
        futures.push_back(std::async(std::launch::async, [this, d] {
            Trained t;
            t.entry = train_entry(d, &t.val_features);
            return t;
        }));
    for (std::size_t i = 0; i < missing.size(); ++i) {
        Trained t = futures[i].get();
        for (std::size_t v = 0; v < t.val_features.size(); ++v)
            val_cache_.insert(static_cast<std::uint64_t>(v), missing[i],
                              std::move(t.val_features[v]));
        entries_.emplace(missing[i].key(), std::move(t.entry));
    }
}

const Leaf& LeafBank::leaf(const SemanticDescriptor& descriptor) {
    return ensure(descriptor).leaf;
}

double LeafBank::leaf_accuracy(const SemanticDescriptor& descriptor) {
    return ensure(descriptor).val_accuracy;
}

// ---------------------------------------------------------------------------
// Greedy selection

namespace {

struct CandidateEval {
    GainReport report;
    bool quality_ok = false;
    bool admitted = false;
    bool cost_bound_exceeded = false;
};

class SelectionRun {
public:
    SelectionRun(const MlpClassifier& baseline, LeafBank& leaves, const SelectionConfig& cfg,
                 const FeatureBank& bank)
        : baseline_(baseline), leaves_(leaves), cfg_(cfg), bank_(bank) {
        q_baseline_ =
            baseline_accuracy(baseline_, leaves_.val_set(), cfg_.final_threshold);
        incumbent_gain_ = cfg_.initial_gain_floor;
    }

    SelectionResult run() {
        SelectionResult result;
        result.q_baseline = q_baseline_;
        if (cfg_.search_space.empty()) {
            result.audit.push_back({"warning", "<empty>", {}, 0.0, 0.0, false,
                                    "empty search space, returning empty first stage"});
            result.report = measure(StageExpr{}).report;
            return result;
        }
        leaves_.prefetch(cfg_.search_space, cfg_.parallel_leaf_training);

        phase_singles();
        phase_pairs();

        result.expr = incumbent_;
        result.audit = std::move(audit_);
        result.report = measure(incumbent_).report;
        return result;
    }

private:
    CandidateEval measure(const StageExpr& expr) {
        CandidateEval eval;
        // A stage at least as expensive as the final classifier can never
        // gain; record the f=0 cost bound instead of constructing it.
        const long long worst = stage_worst_case_macs(expr, leaves_.input_height(),
                                                      leaves_.input_width(), bank_);
        if (worst >= baseline_.macs_per_inference()) {
            eval.report = make_gain_report(
                static_cast<double>(baseline_.macs_per_inference()),
                static_cast<double>(worst), 0.0, q_baseline_, q_baseline_);
            eval.quality_ok = true;
            eval.admitted = false;
            eval.cost_bound_exceeded = true;
            return eval;
        }
        Hierarchy h(expr, cfg_.delta, baseline_, cfg_.final_threshold, bank_,
                    leaves_.input_height(), leaves_.input_width());
        eval.report = measure_gain(h, leaves_.val_set(), &leaves_.val_cache());
        eval.quality_ok = q_baseline_ - eval.report.q_hier < cfg_.epsilon;
        eval.admitted = eval.quality_ok && eval.report.gain > incumbent_gain_;
        return eval;
    }

    void record(const std::string& phase, const StageExpr& expr,
                std::vector<std::string> tried, const CandidateEval& eval) {
        std::string note;
        if (eval.cost_bound_exceeded)
            note = "first-stage cost bound exceeds the final classifier";
        else if (!eval.quality_ok)
            note = "quality constraint violated";
        audit_.push_back({phase, expr.to_string(), std::move(tried), eval.report.q_hier,
                          eval.report.gain, eval.admitted, std::move(note)});
    }

    void phase_singles() {
        for (const auto& descriptor : cfg_.search_space) {
            StageExpr candidate = incumbent_;
            candidate.clauses.push_back(Clause{leaves_.leaf(descriptor), std::nullopt});
            const CandidateEval eval = measure(candidate);
            record("single", candidate, {descriptor.key()}, eval);
            if (eval.admitted) {
                incumbent_ = std::move(candidate);
                incumbent_gain_ = eval.report.gain;
                admitted_.insert(descriptor.key());
            }
        }
    }

    void phase_pairs() {
        std::vector<SemanticDescriptor> remaining;
        for (const auto& d : cfg_.search_space)
            if (!admitted_.count(d.key())) remaining.push_back(d);

        for (;;) {
            if (remaining.size() < 2) return;
            const int k_eff = std::min<int>(cfg_.k, static_cast<int>(remaining.size()) - 1);
            if (k_eff < 2) return;

            // Rank by standalone leaf validation accuracy; ties broken by
            // cheaper preprocessing, then search-space order.
            std::vector<std::size_t> order(remaining.size());
            for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                const double qa = leaves_.leaf_accuracy(remaining[a]);
                const double qb = leaves_.leaf_accuracy(remaining[b]);
                if (qa != qb) return qa > qb;
                return preprocessing_cost(remaining[a], leaves_.input_height(),
                                          leaves_.input_width(), bank_) <
                       preprocessing_cost(remaining[b], leaves_.input_height(),
                                          leaves_.input_width(), bank_);
            });

            bool admitted_this_pass = false;
            for (int i = 0; i < k_eff && !admitted_this_pass; ++i) {
                for (int j = i + 1; j < k_eff; ++j) {
                    const SemanticDescriptor& a = remaining[order[static_cast<std::size_t>(i)]];
                    const SemanticDescriptor& b = remaining[order[static_cast<std::size_t>(j)]];
                    StageExpr candidate = incumbent_;
                    candidate.clauses.push_back(Clause{leaves_.leaf(a), leaves_.leaf(b)});
                    const CandidateEval eval = measure(candidate);
                    record("pair", candidate, {a.key(), b.key()}, eval);
                    if (eval.admitted) {
                        incumbent_ = std::move(candidate);
                        incumbent_gain_ = eval.report.gain;
                        admitted_.insert(a.key());
                        admitted_.insert(b.key());
                        std::erase_if(remaining, [&](const SemanticDescriptor& d) {
                            return admitted_.count(d.key()) != 0;
                        });
                        admitted_this_pass = true;
                        break;  // re-prune, re-rank, restart the pair scan
                    }
                }
            }
            if (!admitted_this_pass) return;
        }
    }

    const MlpClassifier& baseline_;
    LeafBank& leaves_;
    const SelectionConfig& cfg_;
    const FeatureBank& bank_;
    double q_baseline_ = 0.0;
    StageExpr incumbent_;
    double incumbent_gain_ = 0.0;
    std::set<std::string> admitted_;
    std::vector<CandidateRecord> audit_;
};

}  // namespace

SelectionResult select_semantics_on(const MlpClassifier& baseline, LeafBank& leaves,
                                    const SelectionConfig& config, const FeatureBank& bank) {
    return SelectionRun(baseline, leaves, config, bank).run();
}

SelectionResult select_semantics(const MlpClassifier& baseline,
                                 const std::vector<LabeledImage>& train_images,
                                 const SelectionConfig& config, const FeatureBank& bank) {
    std::vector<LabeledImage> fit, val;
    split_holdout(train_images, config.validation_fraction, config.leaf_train.seed, fit, val);
    LeafBank leaves(std::move(fit), std::move(val), bank, config.leaf_hidden, config.leaf_train);
    return select_semantics_on(baseline, leaves, config, bank);
}

// ---------------------------------------------------------------------------
// Exhaustive oracle

namespace {

struct ClauseSpec {
    int first;
    int second;  // -1 for singles

    int leaf_count() const { return second < 0 ? 1 : 2; }
};

void enumerate_expressions(int next, int n, std::vector<bool>& used,
                           std::vector<ClauseSpec>& current,
                           std::vector<std::vector<ClauseSpec>>& out) {
    while (next < n && used[static_cast<std::size_t>(next)]) ++next;
    if (next == n) {
        out.push_back(current);
        return;
    }
    // descriptor excluded
    enumerate_expressions(next + 1, n, used, current, out);
    // descriptor as a single clause
    current.push_back({next, -1});
    enumerate_expressions(next + 1, n, used, current, out);
    current.pop_back();
    // descriptor OR-paired with a later unused descriptor
    for (int j = next + 1; j < n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        used[static_cast<std::size_t>(j)] = true;
        current.push_back({next, j});
        enumerate_expressions(next + 1, n, used, current, out);
        current.pop_back();
        used[static_cast<std::size_t>(j)] = false;
    }
}

}  // namespace

OracleResult exhaustive_oracle_on(const MlpClassifier& baseline, LeafBank& leaves,
                                  const SelectionConfig& config, const FeatureBank& bank) {
    const auto& space = config.search_space;
    if (space.size() > 6)
        throw ContractError("exhaustive oracle refuses search spaces larger than 6 (got " +
                            std::to_string(space.size()) + ")");
    leaves.prefetch(space, config.parallel_leaf_training);

    std::vector<std::vector<ClauseSpec>> expressions;
    std::vector<bool> used(space.size(), false);
    std::vector<ClauseSpec> current;
    enumerate_expressions(0, static_cast<int>(space.size()), used, current, expressions);

    // Simplest first so argmax ties resolve toward smaller expressions.
    std::stable_sort(expressions.begin(), expressions.end(),
                     [](const std::vector<ClauseSpec>& a, const std::vector<ClauseSpec>& b) {
                         int la = 0, lb = 0;
                         for (const auto& c : a) la += c.leaf_count();
                         for (const auto& c : b) lb += c.leaf_count();
                         if (la != lb) return la < lb;
                         return a.size() < b.size();
                     });

    const double q_baseline =
        baseline_accuracy(baseline, leaves.val_set(), config.final_threshold);

    OracleResult best;
    bool have_best = false;
    for (const auto& spec : expressions) {
        StageExpr expr;
        for (const auto& clause : spec) {
            if (clause.second < 0)
                expr.clauses.push_back(
                    Clause{leaves.leaf(space[static_cast<std::size_t>(clause.first)]),
                           std::nullopt});
            else
                expr.clauses.push_back(
                    Clause{leaves.leaf(space[static_cast<std::size_t>(clause.first)]),
                           leaves.leaf(space[static_cast<std::size_t>(clause.second)])});
        }
        if (stage_worst_case_macs(expr, leaves.input_height(), leaves.input_width(), bank) >=
            baseline.macs_per_inference())
            continue;  // cannot beat the always-feasible empty stage
        Hierarchy h(expr, config.delta, baseline, config.final_threshold, bank,
                    leaves.input_height(), leaves.input_width());
        const GainReport report = measure_gain(h, leaves.val_set(), &leaves.val_cache());
        if (q_baseline - report.q_hier >= config.epsilon) continue;
        if (!have_best || report.gain > best.gain) {
            best.expr = std::move(expr);
            best.gain = report.gain;
            best.q_hier = report.q_hier;
            have_best = true;
        }
    }
    best.candidates_examined = expressions.size();
    return best;
}

OracleResult exhaustive_oracle(const MlpClassifier& baseline,
                               const std::vector<LabeledImage>& train_images,
                               const SelectionConfig& config, const FeatureBank& bank) {
    std::vector<LabeledImage> fit, val;
    split_holdout(train_images, config.validation_fraction, config.leaf_train.seed, fit, val);
    LeafBank leaves(std::move(fit), std::move(val), bank, config.leaf_hidden, config.leaf_train);
    return exhaustive_oracle_on(baseline, leaves, config, bank);
}

// ---------------------------------------------------------------------------
// Training flow (color, texture, combined)

TrainOutcome train_hierarchy(const MlpClassifier& baseline,
                             const std::vector<LabeledImage>& train_images,
                             const SelectionConfig& color_config,
                             const SelectionConfig& texture_config, const FeatureBank& bank) {
    if (color_config.delta != texture_config.delta)
        throw ContractError("color and texture selection must share one activation threshold");
    if (color_config.final_threshold != texture_config.final_threshold)
        throw ContractError("color and texture selection must share the final threshold");

    std::vector<LabeledImage> fit, val;
    split_holdout(train_images, color_config.validation_fraction, color_config.leaf_train.seed,
                  fit, val);
    LeafBank color_leaves(fit, val, bank, color_config.leaf_hidden, color_config.leaf_train);
    LeafBank texture_leaves(std::move(fit), std::move(val), bank, texture_config.leaf_hidden,
                            texture_config.leaf_train);

    SelectionResult color_sel = select_semantics_on(baseline, color_leaves, color_config, bank);
    SelectionResult texture_sel =
        select_semantics_on(baseline, texture_leaves, texture_config, bank);

    StageExpr combo;
    combo.clauses = color_sel.expr.clauses;
    combo.clauses.insert(combo.clauses.end(), texture_sel.expr.clauses.begin(),
                         texture_sel.expr.clauses.end());

    const int h = color_leaves.input_height();
    const int w = color_leaves.input_width();
    const double delta = color_config.delta;
    const double threshold = color_config.final_threshold;
    FeatureCache measure_cache;

    auto gain_of = [&](const StageExpr& expr) {
        Hierarchy hier(expr, delta, baseline, threshold, bank, h, w);
        return measure_gain(hier, color_leaves.val_set(), &measure_cache);
    };
    const GainReport g_color = gain_of(color_sel.expr);
    const GainReport g_texture = gain_of(texture_sel.expr);
    const GainReport g_combo = gain_of(combo);

    // max-gain stage wins; ties resolve toward color, then texture, then combo
    const StageExpr* winner_expr = &color_sel.expr;
    const GainReport* winner_gain = &g_color;
    std::string winner = "color";
    if (g_texture.gain > winner_gain->gain) {
        winner_expr = &texture_sel.expr;
        winner_gain = &g_texture;
        winner = "texture";
    }
    if (g_combo.gain > winner_gain->gain) {
        winner_expr = &combo;
        winner_gain = &g_combo;
        winner = "combo";
    }
    if (winner_expr->empty()) winner = "empty";

    TrainOutcome outcome{
        Hierarchy(*winner_expr, delta, baseline, threshold, bank, h, w),
        std::move(color_sel),
        std::move(texture_sel),
        g_color,
        g_texture,
        g_combo,
        winner,
        winner_expr->empty(),
    };
    return outcome;
}

}  // namespace semdec
