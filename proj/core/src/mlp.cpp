#include "semdec/mlp.hpp"

#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "semdec/errors.hpp"
#include "semdec/rng.hpp"

namespace semdec {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Numerically stable BCE from the logit.
double bce_from_logit(double z, double t) {
    return std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::fabs(z)));
}

}  // namespace

MlpClassifier MlpClassifier::init(int d_in, int d_hidden, std::uint64_t seed, double scale) {
    if (d_in < 1 || d_hidden < 1)
        throw ContractError("mlp dims must be >= 1, got d_in=" + std::to_string(d_in) +
                            " d_hidden=" + std::to_string(d_hidden));
    MlpClassifier net;
    net.d_in_ = d_in;
    net.d_hidden_ = d_hidden;
    net.init_seed_ = seed;
    net.weights_ih_.resize(static_cast<std::size_t>(d_hidden) * d_in);
    net.bias_h_.assign(static_cast<std::size_t>(d_hidden), 0.0);
    net.weights_ho_.resize(static_cast<std::size_t>(d_hidden));
    net.bias_o_ = 0.0;

    Rng rng(derive_seed(seed, 0x696e6974ull));
    for (auto& w : net.weights_ih_) w = rng.uniform(-scale, scale);
    for (auto& w : net.weights_ho_) w = rng.uniform(-scale, scale);
    return net;
}

double MlpClassifier::output_logit(std::span<const double> x, std::vector<double>& hidden) const {
    if (static_cast<int>(x.size()) != d_in_)
        throw ContractError("input size " + std::to_string(x.size()) + " != d_in " +
                            std::to_string(d_in_));
    hidden.resize(static_cast<std::size_t>(d_hidden_));
    for (int j = 0; j < d_hidden_; ++j) {
        const double* row = &weights_ih_[static_cast<std::size_t>(j) * d_in_];
        double acc = bias_h_[static_cast<std::size_t>(j)];
        for (int i = 0; i < d_in_; ++i) acc += row[i] * x[static_cast<std::size_t>(i)];
        hidden[static_cast<std::size_t>(j)] = sigmoid(acc);
    }
    double z = bias_o_;
    for (int j = 0; j < d_hidden_; ++j)
        z += weights_ho_[static_cast<std::size_t>(j)] * hidden[static_cast<std::size_t>(j)];
    return z;
}

InferenceResult MlpClassifier::forward(std::span<const double> x) const {
    std::vector<double> hidden;
    const double z = output_logit(x, hidden);
    return {sigmoid(z), macs_per_inference()};
}

double MlpClassifier::fit(const std::vector<TrainingExample>& examples, const TrainConfig& config) {
    if (config.learning_rate <= 0) throw ContractError("learning_rate must be positive");
    if (config.epochs < 1) throw ContractError("epochs must be >= 1");
    if (config.batch_size < 1) throw ContractError("batch_size must be >= 1");
    if (examples.empty()) throw ContractError("training needs at least one example");
    bool has_pos = false, has_neg = false;
    for (const auto& ex : examples) {
        if (static_cast<int>(ex.input.size()) != d_in_)
            throw ContractError("training example dimension mismatch");
        (ex.target > 0.5 ? has_pos : has_neg) = true;
    }
    if (!has_pos || !has_neg)
        throw ContractError("training needs at least one example of each target");

    train_seed_ = config.seed;
    Rng rng(derive_seed(config.seed, 0x747261696eull));
    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), 0);

    const auto n_w_ih = weights_ih_.size();
    std::vector<double> g_w_ih(n_w_ih), g_b_h(bias_h_.size()), g_w_ho(weights_ho_.size());
    std::vector<double> hidden;

    double epoch_loss = 0.0;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(order);
        epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t end =
                std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            const double inv_batch = 1.0 / static_cast<double>(end - start);
            std::fill(g_w_ih.begin(), g_w_ih.end(), 0.0);
            std::fill(g_b_h.begin(), g_b_h.end(), 0.0);
            std::fill(g_w_ho.begin(), g_w_ho.end(), 0.0);
            double g_b_o = 0.0;

            for (std::size_t s = start; s < end; ++s) {
                const TrainingExample& ex = examples[order[s]];
                const double z = output_logit(ex.input, hidden);
                epoch_loss += bce_from_logit(z, ex.target);
                const double dz = sigmoid(z) - ex.target;
                g_b_o += dz;
                for (int j = 0; j < d_hidden_; ++j) {
                    const double h = hidden[static_cast<std::size_t>(j)];
                    g_w_ho[static_cast<std::size_t>(j)] += dz * h;
                    const double dzh = dz * weights_ho_[static_cast<std::size_t>(j)] * h * (1.0 - h);
                    g_b_h[static_cast<std::size_t>(j)] += dzh;
                    double* grow = &g_w_ih[static_cast<std::size_t>(j) * d_in_];
                    const double* xin = ex.input.data();
                    for (int i = 0; i < d_in_; ++i) grow[i] += dzh * xin[i];
                }
            }

            const double step = config.learning_rate * inv_batch;
            for (std::size_t i = 0; i < n_w_ih; ++i) weights_ih_[i] -= step * g_w_ih[i];
            for (std::size_t j = 0; j < bias_h_.size(); ++j) {
                bias_h_[j] -= step * g_b_h[j];
                weights_ho_[j] -= step * g_w_ho[j];
            }
            bias_o_ -= step * g_b_o;
        }
        epoch_loss /= static_cast<double>(examples.size());
        if (!std::isfinite(epoch_loss))
            throw DivergenceError("training diverged (non-finite loss) at epoch " +
                                  std::to_string(epoch + 1));
    }
    return epoch_loss;
}

double MlpClassifier::get_parameter(std::size_t i) const {
    if (i < weights_ih_.size()) return weights_ih_[i];
    i -= weights_ih_.size();
    if (i < bias_h_.size()) return bias_h_[i];
    i -= bias_h_.size();
    if (i < weights_ho_.size()) return weights_ho_[i];
    return bias_o_;
}

void MlpClassifier::set_parameter(std::size_t i, double value) {
    if (i < weights_ih_.size()) {
        weights_ih_[i] = value;
        return;
    }
    i -= weights_ih_.size();
    if (i < bias_h_.size()) {
        bias_h_[i] = value;
        return;
    }
    i -= bias_h_.size();
    if (i < weights_ho_.size()) {
        weights_ho_[i] = value;
        return;
    }
    bias_o_ = value;
}

double MlpClassifier::loss_at(const TrainingExample& example) const {
    std::vector<double> hidden;
    return bce_from_logit(output_logit(example.input, hidden), example.target);
}

std::vector<double> MlpClassifier::gradient_at(const TrainingExample& example) const {
    std::vector<double> hidden;
    const double z = output_logit(example.input, hidden);
    const double dz = sigmoid(z) - example.target;

    std::vector<double> grad(parameter_count(), 0.0);
    const std::size_t off_bh = weights_ih_.size();
    const std::size_t off_who = off_bh + bias_h_.size();
    const std::size_t off_bo = off_who + weights_ho_.size();
    for (int j = 0; j < d_hidden_; ++j) {
        const double h = hidden[static_cast<std::size_t>(j)];
        grad[off_who + static_cast<std::size_t>(j)] = dz * h;
        const double dzh = dz * weights_ho_[static_cast<std::size_t>(j)] * h * (1.0 - h);
        grad[off_bh + static_cast<std::size_t>(j)] = dzh;
        for (int i = 0; i < d_in_; ++i)
            grad[static_cast<std::size_t>(j) * d_in_ + static_cast<std::size_t>(i)] =
                dzh * example.input[static_cast<std::size_t>(i)];
    }
    grad[off_bo] = dz;
    return grad;
}

double gradient_check(const MlpClassifier& net, const TrainingExample& example) {
    constexpr double kStep = 1e-5;
    const std::vector<double> analytic = net.gradient_at(example);
    MlpClassifier probe = net;
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double saved = probe.get_parameter(i);
        probe.set_parameter(i, saved + kStep);
        const double up = probe.loss_at(example);
        probe.set_parameter(i, saved - kStep);
        const double down = probe.loss_at(example);
        probe.set_parameter(i, saved);
        const double numeric = (up - down) / (2.0 * kStep);
        const double a = analytic[i];
        const double scale = std::max(std::fabs(a), std::fabs(numeric));
        if (scale < 1e-8) continue;  // both effectively zero
        worst = std::max(worst, std::fabs(a - numeric) / scale);
    }
    return worst;
}

std::string MlpClassifier::serialize() const {
    nlohmann::json j;
    j["format"] = "semdec-mlp";
    j["version"] = 1;
    j["d_in"] = d_in_;
    j["d_hidden"] = d_hidden_;
    j["init_seed"] = init_seed_;
    j["train_seed"] = train_seed_;
    j["w_ih"] = weights_ih_;
    j["b_h"] = bias_h_;
    j["w_ho"] = weights_ho_;
    j["b_o"] = bias_o_;
    return j.dump();
}

MlpClassifier MlpClassifier::deserialize(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("mlp deserialize: ") + e.what());
    }
    if (j.value("format", "") != "semdec-mlp") throw DataError("not a semdec-mlp document");
    MlpClassifier net;
    net.d_in_ = j.at("d_in").get<int>();
    net.d_hidden_ = j.at("d_hidden").get<int>();
    net.init_seed_ = j.at("init_seed").get<std::uint64_t>();
    net.train_seed_ = j.at("train_seed").get<std::uint64_t>();
    net.weights_ih_ = j.at("w_ih").get<std::vector<double>>();
    net.bias_h_ = j.at("b_h").get<std::vector<double>>();
    net.weights_ho_ = j.at("w_ho").get<std::vector<double>>();
    net.bias_o_ = j.at("b_o").get<double>();
    const auto expected = static_cast<std::size_t>(net.d_hidden_) * net.d_in_;
    if (net.weights_ih_.size() != expected || net.bias_h_.size() != static_cast<std::size_t>(net.d_hidden_) ||
        net.weights_ho_.size() != static_cast<std::size_t>(net.d_hidden_))
        throw DataError("mlp weight arrays do not match declared dims");
    return net;
}

MlpClassifier train_classifier(int d_in, int d_hidden, const std::vector<TrainingExample>& examples,
                               const TrainConfig& config) {
    MlpClassifier net = MlpClassifier::init(d_in, d_hidden, config.seed, config.weight_init_scale);
    net.fit(examples, config);
    return net;
}

}  // namespace semdec
