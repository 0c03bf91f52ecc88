#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "semdec/cascade.hpp"
#include "semdec/errors.hpp"
#include "semdec/rng.hpp"
#include "semdec/selection.hpp"
#include "semdec/sweeps.hpp"

namespace {

using namespace semdec;

struct CommonFlags {
    std::string data;
    std::string config_file;
    std::string out_dir = "semdec-out";
    int target_class = -1;
    std::uint64_t seed = 0;
    bool seed_set = false;
    double delta = -2.0;
    double epsilon = -1.0;
    double clutter = -1.0;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--data", flags.data,
                    "CIFAR batch dir/.bin file, or a synthetic spec file "
                    "(default: $SEMDEC_DATA_DIR)");
    cmd->add_option("--config", flags.config_file, "key=value config overriding all defaults");
    cmd->add_option("--out", flags.out_dir, "report output directory");
    cmd->add_option("--target-class", flags.target_class, "class id of the object of interest");
    cmd->add_option("--seed", flags.seed, "master seed")->each([&](const std::string&) {
        flags.seed_set = true;
    });
    cmd->add_option("--delta", flags.delta, "activation threshold (default 0.4 synthetic / 0.55 CIFAR)");
    cmd->add_option("--epsilon", flags.epsilon, "max allowed accuracy drop for selection");
}

RunConfig resolve_config(const CommonFlags& flags) {
    RunConfig cfg;
    if (!flags.config_file.empty()) cfg.apply_config(KeyValueConfig::from_file(flags.config_file));
    if (!flags.data.empty()) cfg.data_path = flags.data;
    if (cfg.data_path.empty()) {
        if (const char* env = std::getenv("SEMDEC_DATA_DIR")) cfg.data_path = env;
    }
    if (flags.target_class >= 0) cfg.target_class = flags.target_class;
    if (flags.seed_set) cfg.seed = flags.seed;
    if (flags.delta >= -1.0) cfg.delta = flags.delta;
    if (flags.epsilon >= 0.0) cfg.epsilon = flags.epsilon;
    if (flags.clutter >= 0.0) cfg.clutter_fraction = flags.clutter;
    return cfg;
}

void print_rows(const SweepReport& report) {
    std::cout << report.to_csv();
}

int run_train(const CommonFlags& flags) {
    const RunConfig cfg = resolve_config(flags);
    TrainedStack stack = train_stack(cfg);
    std::filesystem::create_directories(flags.out_dir);
    save_hierarchy(stack.outcome.hierarchy, std::filesystem::path(flags.out_dir) / "hierarchy.json");
    {
        std::ofstream report(std::filesystem::path(flags.out_dir) / "train_report.json");
        report << train_report_json(stack) << "\n";
    }
    std::cout << "winner: " << stack.outcome.winner << "\n"
              << "first stage: " << stack.outcome.hierarchy.first_stage().to_string() << "\n"
              << "gain(color)=" << stack.outcome.gain_color.gain
              << " gain(texture)=" << stack.outcome.gain_texture.gain
              << " gain(combo)=" << stack.outcome.gain_combo.gain << "\n"
              << "train wall time: " << stack.wall_train_s << " s\n"
              << "wrote " << flags.out_dir << "/hierarchy.json and train_report.json\n";
    return 0;
}

int run_evaluate(const CommonFlags& flags, const std::string& model_path) {
    const RunConfig cfg = resolve_config(flags);
    const Hierarchy h = load_hierarchy(model_path);
    LoadedData data = load_data(cfg);
    TaskOptions options;
    options.train_fraction = cfg.train_fraction;
    options.test_size = cfg.test_size;
    const DetectionTask task = make_detection_task(data.pool, cfg.target_class,
                                                   cfg.clutter_fraction, cfg.seed, options);
    SweepReport report = evaluate_report(h, task, cfg);
    write_report(report, flags.out_dir);
    print_rows(report);
    return 0;
}

enum class SweepKind { Clutter, Delta, Complexity, Stages };

int run_sweep(const CommonFlags& flags, SweepKind kind, const std::string& list_override) {
    RunConfig cfg = resolve_config(flags);
    if (!list_override.empty()) {
        KeyValueConfig patch;
        switch (kind) {
            case SweepKind::Clutter: patch.set("sweep.clutter_fractions", list_override); break;
            case SweepKind::Delta: patch.set("sweep.deltas", list_override); break;
            case SweepKind::Complexity: patch.set("sweep.hidden_sizes", list_override); break;
            case SweepKind::Stages: patch.set("sweep.comparison_fractions", list_override); break;
        }
        cfg.apply_config(patch);
    }
    const TrainedStack stack = train_stack(cfg);
    SweepReport report;
    switch (kind) {
        case SweepKind::Clutter:
            report = run_clutter_sweep(stack, stack.cfg.clutter_fractions);
            break;
        case SweepKind::Delta:
            report = run_delta_sweep(stack, stack.cfg.deltas);
            break;
        case SweepKind::Complexity:
            report = run_complexity_sweep(stack, stack.cfg.hidden_sizes);
            break;
        case SweepKind::Stages: {
            std::vector<double> fractions = stack.cfg.comparison_fractions;
            if (fractions.empty()) fractions = {stack.cfg.clutter_fraction};
            report = run_stage_comparison(stack, fractions);
            break;
        }
    }
    write_report(report, flags.out_dir);
    print_rows(report);
    std::cout << "wrote " << flags.out_dir << "/" << report.sweep_name << ".csv (+.json)\n";
    return 0;
}

int run_oracle_check(const CommonFlags& flags, const std::string& space_csv) {
    const RunConfig cfg = resolve_config(flags);
    LoadedData data = load_data(cfg);
    TaskOptions options;
    options.train_fraction = cfg.train_fraction;
    options.test_size = cfg.test_size;
    const DetectionTask task = make_detection_task(data.pool, cfg.target_class,
                                                   cfg.clutter_fraction, cfg.seed, options);

    std::vector<TrainingExample> examples;
    for (const auto& img : task.train_set)
        examples.push_back({flatten_rgb(img),
                            img.detection_label == DetectionLabel::ObjectOfInterest ? 1.0 : 0.0});
    TrainConfig final_train = cfg.final_train;
    final_train.seed = derive_seed(cfg.seed, 0x66696e616cull);
    const MlpClassifier baseline =
        train_classifier(3 * task.train_set.front().height * task.train_set.front().width,
                         cfg.final_hidden, examples, final_train);

    SelectionConfig sel;
    sel.epsilon = cfg.epsilon;
    sel.k = cfg.k_color;
    sel.delta = cfg.delta < 0 ? (data.is_cifar ? 0.55 : 0.4) : cfg.delta;
    sel.leaf_hidden = cfg.leaf_hidden;
    sel.leaf_train = cfg.leaf_train;
    sel.leaf_train.seed = derive_seed(cfg.seed, 0x636f6c6full);
    sel.validation_fraction = cfg.validation_fraction;
    sel.final_threshold = cfg.final_threshold;
    sel.parallel_leaf_training = cfg.parallel;
    for (const auto& name : split_list(space_csv))
        sel.search_space.push_back(SemanticDescriptor::color(color_name_from_string(name)));

    std::vector<LabeledImage> fit, val;
    split_holdout(task.train_set, sel.validation_fraction, sel.leaf_train.seed, fit, val);
    LeafBank leaves(std::move(fit), std::move(val), cfg.bank, sel.leaf_hidden, sel.leaf_train);

    const SelectionResult greedy = select_semantics_on(baseline, leaves, sel, cfg.bank);
    const OracleResult oracle = exhaustive_oracle_on(baseline, leaves, sel, cfg.bank);

    std::cout << "greedy: " << greedy.expr.to_string() << "  gain=" << greedy.report.gain << "\n"
              << "oracle: " << oracle.expr.to_string() << "  gain=" << oracle.gain << " ("
              << oracle.candidates_examined << " candidates)\n";
    const bool bounded = greedy.report.gain <= oracle.gain + 1e-9;
    std::cout << (bounded ? "greedy gain is bounded by the oracle: OK\n"
                          : "greedy gain exceeds the oracle: BUG\n");
    return bounded ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"semdec: two-stage semantically gated object detection harness"};
    app.require_subcommand(1);

    CommonFlags flags;
    std::string model_path, list_override, space_csv = "red,yellow,green,blue,cyan,magenta";

    CLI::App* train = app.add_subcommand("train", "train a hierarchy and save the bundle");
    add_common(train, flags);

    CLI::App* evaluate = app.add_subcommand("evaluate", "evaluate a saved hierarchy bundle");
    add_common(evaluate, flags);
    evaluate->add_option("--model", model_path, "hierarchy.json path")->required();
    evaluate->add_option("--clutter", flags.clutter, "test-set clutter fraction");

    CLI::App* sweep_clutter =
        app.add_subcommand("sweep-clutter", "evaluate one hierarchy across clutter fractions");
    add_common(sweep_clutter, flags);
    sweep_clutter->add_option("--fractions", list_override, "comma list, e.g. 0.6,0.75,0.9");

    CLI::App* sweep_delta =
        app.add_subcommand("sweep-delta", "evaluate one hierarchy across activation thresholds");
    add_common(sweep_delta, flags);
    sweep_delta->add_option("--deltas", list_override, "comma list of thresholds");

    CLI::App* sweep_complexity = app.add_subcommand(
        "sweep-complexity", "retrain first-stage leaves across hidden sizes");
    add_common(sweep_complexity, flags);
    sweep_complexity->add_option("--hidden-sizes", list_override, "ascending comma list");

    CLI::App* compare =
        app.add_subcommand("compare-stages", "baseline vs color vs texture vs combined stage");
    add_common(compare, flags);
    compare->add_option("--fractions", list_override, "clutter fractions to compare at");

    CLI::App* oracle = app.add_subcommand(
        "oracle-check", "greedy selection against the exhaustive oracle on a small space");
    add_common(oracle, flags);
    oracle->add_option("--space", space_csv, "comma list of color buckets (max 6)");

    try {
        app.parse(argc, argv);
        if (train->parsed()) return run_train(flags);
        if (evaluate->parsed()) return run_evaluate(flags, model_path);
        if (sweep_clutter->parsed()) return run_sweep(flags, SweepKind::Clutter, list_override);
        if (sweep_delta->parsed()) return run_sweep(flags, SweepKind::Delta, list_override);
        if (sweep_complexity->parsed())
            return run_sweep(flags, SweepKind::Complexity, list_override);
        if (compare->parsed()) return run_sweep(flags, SweepKind::Stages, list_override);
        if (oracle->parsed()) return run_oracle_check(flags, space_csv);
        return 1;
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const ContractError& e) {
        std::cerr << "contract error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
