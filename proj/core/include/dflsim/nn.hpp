#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "dflsim/types.hpp"

namespace dflsim::nn {

enum class HiddenActivation { relu };
enum class OutputActivation { softmax };

struct ModelArch {
    std::size_t input_dim = 22;
    std::vector<std::size_t> hidden_dims;
    std::size_t output_dim = 2;
    HiddenActivation hidden_activation = HiddenActivation::relu;
    OutputActivation output_activation = OutputActivation::softmax;

    // 22-16-8-2 and 22-128-32-2.
    static ModelArch small();
    static ModelArch large();

    // Throws ConfigError on zero-sized layers.
    void validate() const;

    // (out, in) for every layer, input to output.
    std::vector<std::pair<std::size_t, std::size_t>> layer_shapes() const;

    friend bool operator==(const ModelArch&, const ModelArch&) = default;
};

struct Layer {
    Matrix weights;  // out x in
    Vector bias;     // out
};

// Weights and biases of a feed-forward ReLU/softmax network. Also used as the
// container for gradients, which share the exact same shape.
struct ModelParams {
    ModelArch arch;
    std::vector<Layer> layers;

    static ModelParams zeros(const ModelArch& arch);

    std::size_t parameter_count() const;
    bool all_finite() const;
    bool same_shape(const ModelParams& other) const;

    // Exact, entry-by-entry equality.
    friend bool operator==(const ModelParams& a, const ModelParams& b);
};

struct TrainConfig {
    double learning_rate = 0.01;
    std::size_t batch_size = 32;
    std::size_t local_epochs = 1;
    std::uint64_t seed = 0;

    void validate() const;
};

struct TrainStats {
    std::vector<double> epoch_losses;
};

// Fan-in scaled uniform init, U(-sqrt(6/fan_in), sqrt(6/fan_in)); biases zero.
ModelParams init_params(const ModelArch& arch, std::uint64_t seed);

std::vector<double> forward(const ModelParams& params, std::span<const double> features);

// Row-wise class probabilities for a batch of feature rows.
Matrix forward_batch(const ModelParams& params, const Matrix& features);

// Mean softmax cross-entropy over the rows.
double loss(const ModelParams& params, const Matrix& features, std::span<const Label> labels);

struct LossAndGradients {
    double loss = 0.0;
    ModelParams gradients;
};

// Backpropagated gradients of the mean cross-entropy loss.
LossAndGradients loss_and_gradients(const ModelParams& params, const Matrix& features,
                                    std::span<const Label> labels);

inline ModelParams gradients(const ModelParams& params, const Matrix& features, std::span<const Label> labels) {
    return loss_and_gradients(params, features, labels).gradients;
}

// Mini-batch gradient descent. Each epoch reshuffles the rows with a stream seeded
// from cfg.seed and the epoch index.
TrainStats train_local(ModelParams& params, const LabeledRows& data, const TrainConfig& cfg);

// Fraction of rows whose argmax class matches the label; ties go to class 0.
double evaluate(const ModelParams& params, const LabeledRows& data);

// Elementwise weighted mean of `own` and every received model. Empty weights means
// uniform over own + received; otherwise weights[0] belongs to own.
ModelParams federated_average(const ModelParams& own, std::span<const ModelParams* const> received,
                              std::span<const double> weights = {});

ModelParams federated_average(const ModelParams& own, const std::vector<ModelParams>& received,
                              std::span<const double> weights = {});

// Flat little-endian binary form: "DFLP", u32 version, u32 input_dim, u32 layer count,
// then per layer u32 out, u32 in, out*in f64 weights (row-major), out f64 biases.
void write_params(std::ostream& out, const ModelParams& params);
ModelParams read_params(std::istream& in);

}  // namespace dflsim::nn
