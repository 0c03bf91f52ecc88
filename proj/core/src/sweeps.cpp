#include "semdec/sweeps.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "semdec/errors.hpp"
#include "semdec/rng.hpp"

namespace semdec {

namespace {

std::string fmt(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double elapsed_s(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

void RunConfig::apply_config(const KeyValueConfig& cfg) {
    data_path = cfg.get_string("data.path", data_path);
    target_class = cfg.get_int("data.target_class", target_class);
    clutter_fraction = cfg.get_double("data.clutter_fraction", clutter_fraction);
    seed = cfg.get_u64("data.seed", seed);
    train_fraction = cfg.get_double("data.train_fraction", train_fraction);
    test_size = cfg.get_int("data.test_size", test_size);
    pool_limit = cfg.get_int("data.pool_limit", pool_limit);

    bank.apply_config(cfg);

    final_hidden = cfg.get_int("mlp.final_hidden", final_hidden);
    final_train.learning_rate = cfg.get_double("mlp.final_lr", final_train.learning_rate);
    final_train.epochs = cfg.get_int("mlp.final_epochs", final_train.epochs);
    final_train.batch_size = cfg.get_int("mlp.final_batch", final_train.batch_size);
    final_train.weight_init_scale =
        cfg.get_double("mlp.final_init_scale", final_train.weight_init_scale);
    leaf_hidden = cfg.get_int("mlp.leaf_hidden", leaf_hidden);
    leaf_train.learning_rate = cfg.get_double("mlp.leaf_lr", leaf_train.learning_rate);
    leaf_train.epochs = cfg.get_int("mlp.leaf_epochs", leaf_train.epochs);
    leaf_train.batch_size = cfg.get_int("mlp.leaf_batch", leaf_train.batch_size);
    leaf_train.weight_init_scale =
        cfg.get_double("mlp.leaf_init_scale", leaf_train.weight_init_scale);

    epsilon = cfg.get_double("selection.epsilon", epsilon);
    delta = cfg.get_double("selection.delta", delta);
    k_color = cfg.get_int("selection.k_color", k_color);
    k_texture = cfg.get_int("selection.k_texture", k_texture);
    validation_fraction = cfg.get_double("selection.validation_fraction", validation_fraction);
    initial_gain_floor = cfg.get_double("selection.gain_floor", initial_gain_floor);
    final_threshold = cfg.get_double("selection.final_threshold", final_threshold);
    use_color = cfg.get_bool("selection.use_color", use_color);
    use_texture = cfg.get_bool("selection.use_texture", use_texture);
    parallel = cfg.get_bool("selection.parallel", parallel);

    clutter_fractions = cfg.get_double_list("sweep.clutter_fractions", clutter_fractions);
    deltas = cfg.get_double_list("sweep.deltas", deltas);
    hidden_sizes = cfg.get_int_list("sweep.hidden_sizes", hidden_sizes);
    comparison_fractions = cfg.get_double_list("sweep.comparison_fractions", comparison_fractions);
}

std::map<std::string, std::string> RunConfig::snapshot() const {
    std::map<std::string, std::string> s;
    s["data.path"] = data_path;
    s["data.target_class"] = std::to_string(target_class);
    s["data.clutter_fraction"] = fmt(clutter_fraction);
    s["data.seed"] = std::to_string(seed);
    s["data.train_fraction"] = fmt(train_fraction);
    s["data.test_size"] = std::to_string(test_size);
    s["data.pool_limit"] = std::to_string(pool_limit);
    s["features.grid"] = std::to_string(bank.grid);
    s["mlp.final_hidden"] = std::to_string(final_hidden);
    s["mlp.final_lr"] = fmt(final_train.learning_rate);
    s["mlp.final_epochs"] = std::to_string(final_train.epochs);
    s["mlp.leaf_hidden"] = std::to_string(leaf_hidden);
    s["mlp.leaf_lr"] = fmt(leaf_train.learning_rate);
    s["mlp.leaf_epochs"] = std::to_string(leaf_train.epochs);
    s["selection.epsilon"] = fmt(epsilon);
    s["selection.delta"] = fmt(delta);
    s["selection.k_color"] = std::to_string(k_color);
    s["selection.k_texture"] = std::to_string(k_texture);
    s["selection.validation_fraction"] = fmt(validation_fraction);
    s["selection.final_threshold"] = fmt(final_threshold);
    s["selection.use_color"] = use_color ? "true" : "false";
    s["selection.use_texture"] = use_texture ? "true" : "false";
    return s;
}

LoadedData load_data(const RunConfig& cfg) {
    if (cfg.data_path.empty()) throw ConfigError("no data path given (flag --data or data.path)");
    const std::filesystem::path path = cfg.data_path;
    LoadedData data;
    if (std::filesystem::is_directory(path) || path.extension() == ".bin") {
        data.pool = load_cifar10(path);
        data.is_cifar = true;
    } else {
        data.pool = generate_synthetic(SyntheticSpec::from_config(KeyValueConfig::from_file(path)));
        data.is_cifar = false;
    }
    if (cfg.pool_limit > 0 && data.pool.size() > static_cast<std::size_t>(cfg.pool_limit)) {
        Rng rng(derive_seed(cfg.seed, 0x706f6f6cull));
        rng.shuffle(data.pool);
        data.pool.resize(static_cast<std::size_t>(cfg.pool_limit));
    }
    return data;
}

namespace {

MlpClassifier train_baseline(const DetectionTask& task, const RunConfig& cfg) {
    std::vector<TrainingExample> examples;
    examples.reserve(task.train_set.size());
    for (const auto& img : task.train_set)
        examples.push_back(
            {flatten_rgb(img),
             img.detection_label == DetectionLabel::ObjectOfInterest ? 1.0 : 0.0});
    TrainConfig train = cfg.final_train;
    train.seed = derive_seed(cfg.seed, 0x66696e616cull);
    const int d_in = 3 * task.train_set.front().height * task.train_set.front().width;
    return train_classifier(d_in, cfg.final_hidden, examples, train);
}

SelectionConfig make_selection_config(const RunConfig& cfg, bool color,
                                      int input_h, int input_w) {
    SelectionConfig sel;
    sel.epsilon = cfg.epsilon;
    sel.k = color ? cfg.k_color : cfg.k_texture;
    sel.initial_gain_floor = cfg.initial_gain_floor;
    sel.delta = cfg.delta;
    sel.leaf_hidden = cfg.leaf_hidden;
    sel.leaf_train = cfg.leaf_train;
    sel.leaf_train.seed = derive_seed(cfg.seed, color ? 0x636f6c6full : 0x746578ull);
    sel.validation_fraction = cfg.validation_fraction;
    sel.final_threshold = cfg.final_threshold;
    sel.parallel_leaf_training = cfg.parallel;
    if (color)
        sel.search_space = cfg.use_color ? cfg.bank.color_space()
                                         : std::vector<SemanticDescriptor>{};
    else
        sel.search_space = cfg.use_texture ? cfg.bank.texture_space(input_h, input_w)
                                           : std::vector<SemanticDescriptor>{};
    return sel;
}

}  // namespace

TrainedStack train_stack(const RunConfig& cfg_in) {
    const auto start = std::chrono::steady_clock::now();
    RunConfig cfg = cfg_in;
    LoadedData data = load_data(cfg);
    if (cfg.delta < 0) cfg.delta = data.is_cifar ? 0.55 : 0.4;

    TaskOptions options;
    options.train_fraction = cfg.train_fraction;
    options.test_size = cfg.test_size;
    DetectionTask task = make_detection_task(data.pool, cfg.target_class, cfg.clutter_fraction,
                                             cfg.seed, options);

    MlpClassifier baseline = train_baseline(task, cfg);
    const int h = task.train_set.front().height;
    const int w = task.train_set.front().width;

    // The leaf-train seeds for both spaces must agree so both selections see
    // the same holdout folds.
    SelectionConfig color_cfg = make_selection_config(cfg, true, h, w);
    SelectionConfig texture_cfg = make_selection_config(cfg, false, h, w);
    texture_cfg.leaf_train.seed = color_cfg.leaf_train.seed;
    TrainOutcome outcome =
        train_hierarchy(baseline, task.train_set, color_cfg, texture_cfg, cfg.bank);

    TrainedStack stack{std::move(cfg), std::move(data.pool), std::move(task),
                       std::move(baseline), std::move(outcome), 0.0};
    stack.wall_train_s = elapsed_s(start);
    return stack;
}

// ---------------------------------------------------------------------------
// Reports

namespace {

SweepRow baseline_row(const MlpClassifier& baseline, const std::vector<LabeledImage>& test_set,
                      double threshold) {
    SweepRow row;
    row.label = "baseline";
    row.has_value = false;
    row.avg_macs_per_input = static_cast<double>(baseline.macs_per_inference());
    row.normalized_ops = 1.0;
    row.accuracy = baseline_accuracy(baseline, test_set, threshold);
    row.baseline_accuracy = row.accuracy;
    row.normalized_accuracy = 1.0;
    row.clutter_pass_fraction = 1.0;  // a single classifier sees every input
    row.object_pass_fraction = 1.0;
    return row;
}

SweepRow hierarchy_row(const std::string& label, double value, const Hierarchy& h,
                       const std::vector<LabeledImage>& test_set) {
    const auto start = std::chrono::steady_clock::now();
    const Metrics m = h.evaluate(test_set);
    SweepRow row;
    row.label = label;
    row.value = value;
    row.avg_macs_per_input = m.avg_macs_per_input;
    row.normalized_ops =
        static_cast<double>(h.final_net().macs_per_inference()) / m.avg_macs_per_input;
    row.accuracy = m.accuracy;
    row.baseline_accuracy = baseline_accuracy(h.final_net(), test_set, h.final_threshold());
    row.normalized_accuracy = row.accuracy / row.baseline_accuracy;
    row.clutter_pass_fraction = m.clutter_pass_fraction;
    row.object_pass_fraction = m.object_pass_fraction;
    row.wall_test_s = elapsed_s(start);
    return row;
}

void mark_argmin(SweepReport& report) {
    std::size_t best = 0;
    bool have = false;
    for (std::size_t i = 0; i < report.rows.size(); ++i) {
        if (report.rows[i].label == "baseline") continue;
        if (!have || report.rows[i].avg_macs_per_input < report.rows[best].avg_macs_per_input) {
            best = i;
            have = true;
        }
    }
    if (have) report.rows[best].is_argmin = true;
}

DetectionTask resampled_task(const TrainedStack& stack, double fraction) {
    TaskOptions options;
    options.train_fraction = stack.cfg.train_fraction;
    options.test_size = stack.cfg.test_size;
    return make_detection_task(stack.pool, stack.cfg.target_class, fraction, stack.cfg.seed,
                               options);
}

}  // namespace

SweepReport run_clutter_sweep(const TrainedStack& stack, const std::vector<double>& fractions) {
    SweepReport report;
    report.sweep_name = "clutter";
    report.seed = stack.cfg.seed;
    report.config_snapshot = stack.cfg.snapshot();
    report.total_train_wall_s = stack.wall_train_s;
    report.rows.push_back(baseline_row(stack.baseline, stack.task.test_set,
                                       stack.cfg.final_threshold));
    for (double fraction : fractions) {
        const DetectionTask task = resampled_task(stack, fraction);
        SweepRow row = hierarchy_row("clutter=" + fmt(fraction), fraction,
                                     stack.outcome.hierarchy, task.test_set);
        // per-fraction baseline accuracy for honest normalization
        row.baseline_accuracy =
            baseline_accuracy(stack.baseline, task.test_set, stack.cfg.final_threshold);
        row.normalized_accuracy = row.accuracy / row.baseline_accuracy;
        report.rows.push_back(std::move(row));
    }
    mark_argmin(report);
    return report;
}

SweepReport run_delta_sweep(const TrainedStack& stack, const std::vector<double>& deltas) {
    SweepReport report;
    report.sweep_name = "delta";
    report.seed = stack.cfg.seed;
    report.config_snapshot = stack.cfg.snapshot();
    report.total_train_wall_s = stack.wall_train_s;
    report.rows.push_back(baseline_row(stack.baseline, stack.task.test_set,
                                       stack.cfg.final_threshold));
    for (double delta : deltas) {
        Hierarchy h = stack.outcome.hierarchy;
        h.set_delta(delta);
        report.rows.push_back(
            hierarchy_row("delta=" + fmt(delta), delta, h, stack.task.test_set));
    }
    mark_argmin(report);
    return report;
}

SweepReport run_complexity_sweep(const TrainedStack& stack, const std::vector<int>& hidden_sizes) {
    if (!std::is_sorted(hidden_sizes.begin(), hidden_sizes.end()))
        throw ContractError("hidden sizes must be ascending");
    SweepReport report;
    report.sweep_name = "complexity";
    report.seed = stack.cfg.seed;
    report.config_snapshot = stack.cfg.snapshot();
    report.total_train_wall_s = stack.wall_train_s;
    report.rows.push_back(baseline_row(stack.baseline, stack.task.test_set,
                                       stack.cfg.final_threshold));

    // Same expression, leaves retrained at each width over the same folds.
    std::vector<LabeledImage> fit, val;
    split_holdout(stack.task.train_set, stack.cfg.validation_fraction,
                  derive_seed(stack.cfg.seed, 0x636f6c6full), fit, val);
    const StageExpr& expr = stack.outcome.hierarchy.first_stage();

    for (int hidden : hidden_sizes) {
        if (hidden < 1) throw ContractError("hidden sizes must be positive");
        const auto start = std::chrono::steady_clock::now();
        TrainConfig leaf_train = stack.cfg.leaf_train;
        leaf_train.seed = derive_seed(stack.cfg.seed, 0x68696464ull + static_cast<std::uint64_t>(hidden));
        LeafBank leaves(fit, val, stack.cfg.bank, hidden, leaf_train);

        StageExpr rebuilt;
        for (const auto& clause : expr.clauses) {
            Clause c{leaves.leaf(clause.first.descriptor), std::nullopt};
            if (clause.is_or_pair()) c.second = leaves.leaf(clause.second->descriptor);
            rebuilt.clauses.push_back(std::move(c));
        }
        Hierarchy h(rebuilt, stack.outcome.hierarchy.delta(), stack.baseline,
                    stack.cfg.final_threshold, stack.cfg.bank,
                    stack.outcome.hierarchy.input_height(),
                    stack.outcome.hierarchy.input_width());
        const double train_s = elapsed_s(start);
        SweepRow row = hierarchy_row("hidden=" + std::to_string(hidden),
                                     static_cast<double>(hidden), h, stack.task.test_set);
        row.wall_train_s = train_s;
        report.rows.push_back(std::move(row));
    }
    mark_argmin(report);
    return report;
}

SweepReport run_stage_comparison(const TrainedStack& stack, const std::vector<double>& fractions) {
    SweepReport report;
    report.sweep_name = "stages";
    report.seed = stack.cfg.seed;
    report.config_snapshot = stack.cfg.snapshot();
    report.total_train_wall_s = stack.wall_train_s;
    report.rows.push_back(baseline_row(stack.baseline, stack.task.test_set,
                                       stack.cfg.final_threshold));

    StageExpr combo;
    combo.clauses = stack.outcome.color_selection.expr.clauses;
    combo.clauses.insert(combo.clauses.end(),
                         stack.outcome.texture_selection.expr.clauses.begin(),
                         stack.outcome.texture_selection.expr.clauses.end());
    const std::vector<std::pair<std::string, const StageExpr*>> configs = {
        {"color_only", &stack.outcome.color_selection.expr},
        {"texture_only", &stack.outcome.texture_selection.expr},
        {"color_and_texture", &combo},
    };
    const int h_in = stack.outcome.hierarchy.input_height();
    const int w_in = stack.outcome.hierarchy.input_width();

    for (double fraction : fractions) {
        const DetectionTask task = resampled_task(stack, fraction);
        for (const auto& [name, expr] : configs) {
            Hierarchy h(*expr, stack.outcome.hierarchy.delta(), stack.baseline,
                        stack.cfg.final_threshold, stack.cfg.bank, h_in, w_in);
            SweepRow row =
                hierarchy_row(name + "@" + fmt(fraction), fraction, h, task.test_set);
            report.rows.push_back(std::move(row));
        }
    }
    mark_argmin(report);
    return report;
}

SweepReport evaluate_report(const Hierarchy& h, const DetectionTask& task, const RunConfig& cfg) {
    SweepReport report;
    report.sweep_name = "evaluate";
    report.seed = cfg.seed;
    report.config_snapshot = cfg.snapshot();
    report.rows.push_back(baseline_row(h.final_net(), task.test_set, h.final_threshold()));
    report.rows.push_back(
        hierarchy_row("hierarchy", task.clutter_fraction, h, task.test_set));
    return report;
}

std::string SweepReport::to_csv() const {
    std::string out =
        "sweep,label,value,avg_macs_per_input,normalized_ops,accuracy,baseline_accuracy,"
        "normalized_accuracy,clutter_pass_fraction,object_pass_fraction,is_argmin\n";
    for (const auto& row : rows) {
        out += sweep_name;
        out += ',';
        out += row.label;
        out += ',';
        if (row.has_value) out += fmt(row.value);
        out += ',';
        out += fmt(row.avg_macs_per_input);
        out += ',';
        out += fmt(row.normalized_ops);
        out += ',';
        out += fmt(row.accuracy);
        out += ',';
        out += fmt(row.baseline_accuracy);
        out += ',';
        out += fmt(row.normalized_accuracy);
        out += ',';
        out += fmt(row.clutter_pass_fraction);
        out += ',';
        out += fmt(row.object_pass_fraction);
        out += ',';
        out += row.is_argmin ? '1' : '0';
        out += '\n';
    }
    return out;
}

std::string SweepReport::to_json() const {
    nlohmann::json j;
    j["sweep"] = sweep_name;
    j["seed"] = seed;
    j["config"] = config_snapshot;
    j["total_train_wall_s"] = total_train_wall_s;
    nlohmann::json rows_json = nlohmann::json::array();
    for (const auto& row : rows) {
        nlohmann::json r;
        r["label"] = row.label;
        if (row.has_value) r["value"] = row.value;
        r["avg_macs_per_input"] = row.avg_macs_per_input;
        r["normalized_ops"] = row.normalized_ops;
        r["accuracy"] = row.accuracy;
        r["baseline_accuracy"] = row.baseline_accuracy;
        r["normalized_accuracy"] = row.normalized_accuracy;
        r["clutter_pass_fraction"] = row.clutter_pass_fraction;
        r["object_pass_fraction"] = row.object_pass_fraction;
        r["is_argmin"] = row.is_argmin;
        r["wall_train_s"] = row.wall_train_s;
        r["wall_test_s"] = row.wall_test_s;
        rows_json.push_back(std::move(r));
    }
    j["rows"] = std::move(rows_json);
    return j.dump(2);
}

void write_report(const SweepReport& report, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    {
        std::ofstream csv(out_dir / (report.sweep_name + ".csv"), std::ios::binary);
        if (!csv) throw DataError("cannot write report CSV under " + out_dir.string());
        csv << report.to_csv();
    }
    std::ofstream json(out_dir / (report.sweep_name + ".json"), std::ios::binary);
    if (!json) throw DataError("cannot write report JSON under " + out_dir.string());
    json << report.to_json() << "\n";
}

namespace {

nlohmann::json gain_to_json(const GainReport& g) {
    return {{"n_orig", g.n_orig},   {"n_initial", g.n_initial}, {"f", g.f},
            {"gain", g.gain},       {"q_baseline", g.q_baseline}, {"q_hier", g.q_hier}};
}

nlohmann::json audit_to_json(const std::vector<CandidateRecord>& audit) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& rec : audit) {
        out.push_back({{"phase", rec.phase},
                       {"expression", rec.expression},
                       {"descriptors", rec.descriptor_keys},
                       {"q_hier", rec.q_hier},
                       {"gain", rec.gain},
                       {"admitted", rec.admitted},
                       {"note", rec.note}});
    }
    return out;
}

}  // namespace

std::string train_report_json(const TrainedStack& stack) {
    nlohmann::json j;
    j["winner"] = stack.outcome.winner;
    j["first_stage"] = stack.outcome.hierarchy.first_stage().to_string();
    j["first_stage_empty"] = stack.outcome.first_stage_empty;
    j["delta"] = stack.outcome.hierarchy.delta();
    j["q_baseline"] = stack.outcome.color_selection.q_baseline;
    j["gain_color"] = gain_to_json(stack.outcome.gain_color);
    j["gain_texture"] = gain_to_json(stack.outcome.gain_texture);
    j["gain_combo"] = gain_to_json(stack.outcome.gain_combo);
    j["color_expression"] = stack.outcome.color_selection.expr.to_string();
    j["texture_expression"] = stack.outcome.texture_selection.expr.to_string();
    j["color_audit"] = audit_to_json(stack.outcome.color_selection.audit);
    j["texture_audit"] = audit_to_json(stack.outcome.texture_selection.audit);
    j["wall_train_s"] = stack.wall_train_s;
    j["config"] = stack.cfg.snapshot();
    return j.dump(2);
}

}  // namespace semdec
