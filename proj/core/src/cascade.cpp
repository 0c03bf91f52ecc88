#include "semdec/cascade.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "semdec/errors.hpp"

namespace semdec {

std::size_t StageExpr::leaf_count() const {
    std::size_t n = 0;
    for (const auto& clause : clauses) n += clause.is_or_pair() ? 2 : 1;
    return n;
}

std::vector<std::string> StageExpr::descriptor_keys() const {
    std::vector<std::string> keys;
    for (const auto& clause : clauses) {
        keys.push_back(clause.first.descriptor.key());
        if (clause.is_or_pair()) keys.push_back(clause.second->descriptor.key());
    }
    return keys;
}

std::string StageExpr::to_string() const {
    if (clauses.empty()) return "<empty>";
    std::string out;
    for (std::size_t i = 0; i < clauses.size(); ++i) {
        if (i > 0) out += ".";
        const auto& clause = clauses[i];
        auto leaf_name = [](const Leaf& leaf) {
            const auto& d = leaf.descriptor;
            if (d.kind == SemanticDescriptor::Kind::Color) return color_name_string(d.bucket);
            std::ostringstream os;
            os << "g(" << d.gabor.wavelength << "," << d.gabor.orientation << ")";
            return os.str();
        };
        if (clause.is_or_pair())
            out += "(" + leaf_name(clause.first) + "+" + leaf_name(*clause.second) + ")";
        else
            out += leaf_name(clause.first);
    }
    return out;
}

void StageExpr::validate() const {
    std::set<std::string> seen;
    for (const auto& key : descriptor_keys())
        if (!seen.insert(key).second)
            throw ContractError("descriptor appears in more than one clause: " + key);
}

bool eval_expr(const StageExpr& expr, const std::map<std::string, double>& scores, double delta) {
    auto leaf_passes = [&](const Leaf& leaf) {
        const auto it = scores.find(leaf.descriptor.key());
        if (it == scores.end())
            throw ContractError("missing score for descriptor " + leaf.descriptor.key());
        return it->second >= delta;
    };
    for (const auto& clause : expr.clauses) {
        bool pass = leaf_passes(clause.first);
        if (clause.is_or_pair()) pass = pass || leaf_passes(*clause.second);
        if (!pass) return false;
    }
    return true;
}

const FeatureVector& FeatureCache::get_or_extract(const LabeledImage& image,
                                                  std::uint64_t image_id,
                                                  const SemanticDescriptor& descriptor,
                                                  const FeatureBank& bank) {
    std::string key = descriptor.key();
    key += '#';
    key += std::to_string(image_id);
    auto it = cache_.find(key);
    if (it == cache_.end())
        it = cache_.emplace(std::move(key), extract_feature(image, descriptor, bank)).first;
    return it->second;
}

void FeatureCache::insert(std::uint64_t image_id, const SemanticDescriptor& descriptor,
                          FeatureVector fv) {
    std::string key = descriptor.key();
    key += '#';
    key += std::to_string(image_id);
    cache_.insert_or_assign(std::move(key), std::move(fv));
}

namespace {

long long leaf_prep_cost(const Leaf& leaf, int h, int w, const FeatureBank& bank,
                         bool hsv_charged) {
    return incremental_preprocessing_cost(leaf.descriptor, h, w, bank, hsv_charged);
}

}  // namespace

Hierarchy::Hierarchy(StageExpr first_stage, double delta, MlpClassifier final_net,
                     double final_threshold, FeatureBank bank, int input_height, int input_width,
                     EvalMode mode)
    : first_stage_(std::move(first_stage)),
      delta_(delta),
      final_net_(std::move(final_net)),
      final_threshold_(final_threshold),
      bank_(std::move(bank)),
      input_height_(input_height),
      input_width_(input_width),
      mode_(mode) {
    if (delta_ < 0.0 || delta_ > 1.0) throw ContractError("delta must lie in [0, 1]");
    if (final_threshold_ <= 0.0 || final_threshold_ >= 1.0)
        throw ContractError("final_threshold must lie in (0, 1)");
    if (final_net_.d_in() != 3 * input_height_ * input_width_)
        throw ContractError("final classifier input dims do not match the configured raster");
    first_stage_.validate();

    const int feature_dims = bank_.grid * bank_.grid;
    auto check_leaf = [&](const Leaf& leaf) {
        if (leaf.classifier.d_in() != feature_dims)
            throw ContractError("leaf classifier d_in " + std::to_string(leaf.classifier.d_in()) +
                                " does not match feature dims " + std::to_string(feature_dims));
    };
    for (const auto& clause : first_stage_.clauses) {
        check_leaf(clause.first);
        if (clause.is_or_pair()) check_leaf(*clause.second);
    }

    // Cheapest preprocessing first, stable; within an OR pair the cheaper
    // leaf is evaluated first.
    for (auto& clause : first_stage_.clauses) {
        if (clause.is_or_pair() &&
            preprocessing_cost(clause.second->descriptor, input_height_, input_width_, bank_) <
                preprocessing_cost(clause.first.descriptor, input_height_, input_width_, bank_))
            std::swap(clause.first, *clause.second);
    }
    std::stable_sort(first_stage_.clauses.begin(), first_stage_.clauses.end(),
                     [&](const Clause& a, const Clause& b) {
                         return preprocessing_cost(a.first.descriptor, input_height_, input_width_,
                                                   bank_) <
                                preprocessing_cost(b.first.descriptor, input_height_, input_width_,
                                                   bank_);
                     });

    if (first_stage_worst_case_macs() >= final_net_.macs_per_inference())
        throw ContractError("first stage cost (" + std::to_string(first_stage_worst_case_macs()) +
                            " MACs) must stay below the final classifier (" +
                            std::to_string(final_net_.macs_per_inference()) + " MACs)");
}

void Hierarchy::set_delta(double delta) {
    if (delta < 0.0 || delta > 1.0) throw ContractError("delta must lie in [0, 1]");
    delta_ = delta;
}

long long stage_worst_case_macs(const StageExpr& expr, int input_height, int input_width,
                                const FeatureBank& bank) {
    long long total = 0;
    bool hsv_charged = false;
    auto add_leaf = [&](const Leaf& leaf) {
        total += leaf_prep_cost(leaf, input_height, input_width, bank, hsv_charged);
        if (leaf.descriptor.kind == SemanticDescriptor::Kind::Color) hsv_charged = true;
        total += leaf.classifier.macs_per_inference();
    };
    for (const auto& clause : expr.clauses) {
        add_leaf(clause.first);
        if (clause.is_or_pair()) add_leaf(*clause.second);
    }
    return total;
}

long long Hierarchy::first_stage_worst_case_macs() const {
    return stage_worst_case_macs(first_stage_, input_height_, input_width_, bank_);
}

CascadeResult Hierarchy::classify(const LabeledImage& image, FeatureCache* cache,
                                  std::uint64_t image_id) const {
    if (image.height != input_height_ || image.width != input_width_)
        throw ContractError("image dims do not match the hierarchy's configured input dims");

    CascadeResult result;
    bool hsv_charged = false;

    auto leaf_score = [&](const Leaf& leaf) {
        result.macs_breakdown.preprocessing +=
            leaf_prep_cost(leaf, input_height_, input_width_, bank_, hsv_charged);
        if (leaf.descriptor.kind == SemanticDescriptor::Kind::Color) hsv_charged = true;
        result.macs_breakdown.first_stage += leaf.classifier.macs_per_inference();
        if (cache) {
            const FeatureVector& fv =
                cache->get_or_extract(image, image_id, leaf.descriptor, bank_);
            return leaf.classifier.score(fv.values);
        }
        const FeatureVector fv = extract_feature(image, leaf.descriptor, bank_);
        return leaf.classifier.score(fv.values);
    };

    bool gate_open = true;
    const bool short_circuit = mode_ == EvalMode::ShortCircuit;
    for (const auto& clause : first_stage_.clauses) {
        if (!gate_open && short_circuit) break;
        bool pass = leaf_score(clause.first) >= delta_;
        if (clause.is_or_pair() && (!pass || !short_circuit))
            pass = (leaf_score(*clause.second) >= delta_) || pass;
        gate_open = gate_open && pass;
    }

    result.second_stage_enabled = gate_open;
    if (gate_open) {
        result.macs_breakdown.second_stage = final_net_.macs_per_inference();
        const double score = final_net_.score(flatten_rgb(image));
        result.label = score >= final_threshold_ ? DetectionLabel::ObjectOfInterest
                                                 : DetectionLabel::Clutter;
    } else {
        result.label = DetectionLabel::Clutter;
    }
    result.macs_total = result.macs_breakdown.total();
    return result;
}

Metrics Hierarchy::evaluate(const std::vector<LabeledImage>& test_set, FeatureCache* cache) const {
    if (test_set.empty()) throw ContractError("evaluate needs a nonempty test set");
    long long objects = 0, clutter = 0;
    for (const auto& img : test_set) {
        if (img.detection_label == DetectionLabel::Unset)
            throw ContractError("evaluate needs detection labels on every image");
        (img.detection_label == DetectionLabel::ObjectOfInterest ? objects : clutter) += 1;
    }
    if (objects == 0 || clutter == 0)
        throw ContractError("evaluate needs both labels present in the test set");

    long long correct = 0, passed = 0, objects_passed = 0, clutter_passed = 0;
    long long total_macs = 0, total_prep = 0, total_first = 0, total_second = 0;
    for (std::size_t i = 0; i < test_set.size(); ++i) {
        const auto& img = test_set[i];
        const CascadeResult r = classify(img, cache, static_cast<std::uint64_t>(i));
        correct += r.label == img.detection_label ? 1 : 0;
        if (r.second_stage_enabled) {
            ++passed;
            (img.detection_label == DetectionLabel::ObjectOfInterest ? objects_passed
                                                                     : clutter_passed) += 1;
        }
        total_macs += r.macs_total;
        total_prep += r.macs_breakdown.preprocessing;
        total_first += r.macs_breakdown.first_stage;
        total_second += r.macs_breakdown.second_stage;
    }

    const auto n = static_cast<double>(test_set.size());
    Metrics m;
    m.n_inputs = static_cast<long long>(test_set.size());
    m.accuracy = static_cast<double>(correct) / n;
    m.avg_macs_per_input = static_cast<double>(total_macs) / n;
    m.clutter_pass_fraction = static_cast<double>(clutter_passed) / static_cast<double>(clutter);
    m.object_pass_fraction = static_cast<double>(objects_passed) / static_cast<double>(objects);
    m.pass_fraction_overall = static_cast<double>(passed) / n;
    m.avg_preprocessing_macs = static_cast<double>(total_prep) / n;
    m.avg_first_stage_macs = static_cast<double>(total_first) / n;
    m.avg_second_stage_macs = static_cast<double>(total_second) / n;
    return m;
}

std::vector<double> flatten_rgb(const LabeledImage& image) {
    std::vector<double> out(image.pixels.size());
    for (std::size_t i = 0; i < image.pixels.size(); ++i) out[i] = image.pixels[i] / 255.0;
    return out;
}

double baseline_accuracy(const MlpClassifier& net, const std::vector<LabeledImage>& test_set,
                         double threshold) {
    if (test_set.empty()) throw ContractError("baseline accuracy needs a nonempty set");
    long long correct = 0;
    for (const auto& img : test_set) {
        if (img.detection_label == DetectionLabel::Unset)
            throw ContractError("baseline accuracy needs detection labels");
        const bool object = net.score(flatten_rgb(img)) >= threshold;
        const bool truth = img.detection_label == DetectionLabel::ObjectOfInterest;
        correct += object == truth ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(test_set.size());
}

// --------------------------------------------------------------------------
// Serialization

namespace {

nlohmann::json descriptor_to_json(const SemanticDescriptor& d) {
    nlohmann::json j;
    if (d.kind == SemanticDescriptor::Kind::Color) {
        j["kind"] = "color";
        j["bucket"] = color_name_string(d.bucket);
    } else {
        j["kind"] = "texture";
        j["wavelength"] = d.gabor.wavelength;
        j["orientation"] = d.gabor.orientation;
        j["sigma"] = d.gabor.sigma;
        j["gamma"] = d.gabor.gamma;
        j["kernel_size"] = d.gabor.kernel_size;
    }
    return j;
}

SemanticDescriptor descriptor_from_json(const nlohmann::json& j) {
    if (j.at("kind") == "color")
        return SemanticDescriptor::color(color_name_from_string(j.at("bucket").get<std::string>()));
    GaborParams p;
    p.wavelength = j.at("wavelength").get<double>();
    p.orientation = j.at("orientation").get<double>();
    p.sigma = j.at("sigma").get<double>();
    p.gamma = j.at("gamma").get<double>();
    p.kernel_size = j.at("kernel_size").get<int>();
    return SemanticDescriptor::texture(p);
}

nlohmann::json bank_to_json(const FeatureBank& bank) {
    nlohmann::json j;
    nlohmann::json table = nlohmann::json::array();
    for (const auto& entry : bank.hue_table)
        table.push_back({{"name", color_name_string(entry.name)},
                         {"low", entry.range.low},
                         {"high", entry.range.high}});
    j["hue_table"] = table;
    j["white_sat_max"] = bank.white_sat_max;
    j["white_val_min"] = bank.white_val_min;
    j["black_val_max"] = bank.black_val_max;
    j["grid"] = bank.grid;
    j["gabor_scales"] = bank.gabor_scales;
    j["gabor_orientations"] = bank.gabor_orientations;
    j["reference_dim"] = bank.reference_dim;
    j["sigma_factor"] = bank.sigma_factor;
    j["gabor_gamma"] = bank.gabor_gamma;
    j["cost_color_convert"] = bank.cost_color_convert;
    j["cost_color_bucket_test"] = bank.cost_color_bucket_test;
    j["cost_pool"] = bank.cost_pool;
    return j;
}

FeatureBank bank_from_json(const nlohmann::json& j) {
    FeatureBank bank;
    const auto& table = j.at("hue_table");
    for (std::size_t i = 0; i < bank.hue_table.size(); ++i) {
        bank.hue_table[i].name = color_name_from_string(table.at(i).at("name").get<std::string>());
        bank.hue_table[i].range.low = table.at(i).at("low").get<double>();
        bank.hue_table[i].range.high = table.at(i).at("high").get<double>();
    }
    bank.white_sat_max = j.at("white_sat_max").get<double>();
    bank.white_val_min = j.at("white_val_min").get<double>();
    bank.black_val_max = j.at("black_val_max").get<double>();
    bank.grid = j.at("grid").get<int>();
    bank.gabor_scales = j.at("gabor_scales").get<std::vector<double>>();
    bank.gabor_orientations = j.at("gabor_orientations").get<std::vector<double>>();
    bank.reference_dim = j.at("reference_dim").get<double>();
    bank.sigma_factor = j.at("sigma_factor").get<double>();
    bank.gabor_gamma = j.at("gabor_gamma").get<double>();
    bank.cost_color_convert = j.at("cost_color_convert").get<int>();
    bank.cost_color_bucket_test = j.at("cost_color_bucket_test").get<int>();
    bank.cost_pool = j.at("cost_pool").get<int>();
    bank.validate();
    return bank;
}

nlohmann::json leaf_to_json(const Leaf& leaf) {
    return {{"descriptor", descriptor_to_json(leaf.descriptor)},
            {"classifier", nlohmann::json::parse(leaf.classifier.serialize())}};
}

Leaf leaf_from_json(const nlohmann::json& j) {
    Leaf leaf;
    leaf.descriptor = descriptor_from_json(j.at("descriptor"));
    leaf.classifier = MlpClassifier::deserialize(j.at("classifier").dump());
    return leaf;
}

}  // namespace

std::string Hierarchy::serialize() const {
    nlohmann::json j;
    j["format"] = "semdec-hierarchy";
    j["version"] = 1;
    j["delta"] = delta_;
    j["final_threshold"] = final_threshold_;
    j["eval_mode"] = mode_ == EvalMode::ShortCircuit ? "short_circuit" : "full_accounting";
    j["input_height"] = input_height_;
    j["input_width"] = input_width_;
    j["bank"] = bank_to_json(bank_);
    nlohmann::json clauses = nlohmann::json::array();
    for (const auto& clause : first_stage_.clauses) {
        nlohmann::json leaves = nlohmann::json::array();
        leaves.push_back(leaf_to_json(clause.first));
        if (clause.is_or_pair()) leaves.push_back(leaf_to_json(*clause.second));
        clauses.push_back({{"leaves", leaves}});
    }
    j["clauses"] = clauses;
    j["final"] = nlohmann::json::parse(final_net_.serialize());
    return j.dump(2);
}

Hierarchy Hierarchy::deserialize(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("hierarchy deserialize: ") + e.what());
    }
    if (j.value("format", "") != "semdec-hierarchy")
        throw DataError("not a semdec-hierarchy document");

    StageExpr expr;
    for (const auto& clause_json : j.at("clauses")) {
        const auto& leaves = clause_json.at("leaves");
        Clause clause;
        clause.first = leaf_from_json(leaves.at(0));
        if (leaves.size() > 1) clause.second = leaf_from_json(leaves.at(1));
        if (leaves.size() > 2) throw DataError("clauses are at most OR pairs");
        expr.clauses.push_back(std::move(clause));
    }
    return Hierarchy(std::move(expr), j.at("delta").get<double>(),
                     MlpClassifier::deserialize(j.at("final").dump()),
                     j.at("final_threshold").get<double>(), bank_from_json(j.at("bank")),
                     j.at("input_height").get<int>(), j.at("input_width").get<int>(),
                     j.at("eval_mode") == "short_circuit" ? EvalMode::ShortCircuit
                                                          : EvalMode::FullAccounting);
}

void save_hierarchy(const Hierarchy& h, const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw DataError("cannot write hierarchy to " + file.string());
    out << h.serialize() << "\n";
    if (!out) throw DataError("short write to " + file.string());
}

Hierarchy load_hierarchy(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw DataError("cannot open hierarchy file " + file.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return Hierarchy::deserialize(buffer.str());
}

}  // namespace semdec
