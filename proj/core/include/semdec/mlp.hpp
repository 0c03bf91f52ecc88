#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace semdec {

struct InferenceResult {
    double score = 0.0;   // in (0, 1)
    long long macs = 0;   // equals macs_per_inference() of the producing net
};

struct TrainConfig {
    double learning_rate = 0.1;
    int epochs = 30;
    int batch_size = 16;
    std::uint64_t seed = 0;
    double weight_init_scale = 0.5;
};

struct TrainingExample {
    std::vector<double> input;
    double target = 0.0;  // 0 or 1
};

// 3-layer feedforward net (input, hidden, single sigmoid output) trained by
// minibatch backpropagation on binary cross-entropy. MACs count one
// multiply-accumulate per weight: d_in*d_hidden + d_hidden. Bias adds and
// activations are excluded by definition.
class MlpClassifier {
public:
    MlpClassifier() = default;

    // Weights uniform in [-scale, scale] from a seeded deterministic
    // generator, biases zero.
    static MlpClassifier init(int d_in, int d_hidden, std::uint64_t seed, double scale);

    int d_in() const { return d_in_; }
    int d_hidden() const { return d_hidden_; }
    long long macs_per_inference() const {
        return static_cast<long long>(d_in_) * d_hidden_ + d_hidden_;
    }

    InferenceResult forward(std::span<const double> x) const;
    double score(std::span<const double> x) const { return forward(x).score; }

    // Minibatch gradient descent; returns the final epoch's mean loss.
    // Throws DivergenceError (naming the epoch) if the loss goes non-finite.
    double fit(const std::vector<TrainingExample>& examples, const TrainConfig& config);

    std::string serialize() const;                       // self-describing JSON
    static MlpClassifier deserialize(const std::string& text);

    bool operator==(const MlpClassifier&) const = default;

    // Parameter access for the finite-difference check.
    std::size_t parameter_count() const { return weights_ih_.size() + bias_h_.size() + weights_ho_.size() + 1; }
    double get_parameter(std::size_t i) const;
    void set_parameter(std::size_t i, double value);

    // Loss and analytic gradient of binary cross-entropy at one example;
    // gradient is laid out in parameter order (w_ih, b_h, w_ho, b_o).
    double loss_at(const TrainingExample& example) const;
    std::vector<double> gradient_at(const TrainingExample& example) const;

private:
    int d_in_ = 0;
    int d_hidden_ = 0;
    std::vector<double> weights_ih_;  // d_hidden x d_in, row-major
    std::vector<double> bias_h_;      // d_hidden
    std::vector<double> weights_ho_;  // d_hidden
    double bias_o_ = 0.0;
    std::uint64_t init_seed_ = 0;
    std::uint64_t train_seed_ = 0;

    double output_logit(std::span<const double> x, std::vector<double>& hidden) const;
};

// Convenience: init + fit.
MlpClassifier train_classifier(int d_in, int d_hidden, const std::vector<TrainingExample>& examples,
                               const TrainConfig& config);

// Max relative error between the analytic gradient and central finite
// differences (step 1e-5) over every parameter.
double gradient_check(const MlpClassifier& net, const TrainingExample& example);

}  // namespace semdec
