#include "dflsim/nn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "dflsim/error.hpp"
#include "dflsim/rng.hpp"

namespace dflsim::nn {

ModelArch ModelArch::small() { return ModelArch{22, {16, 8}, 2}; }
ModelArch ModelArch::large() { return ModelArch{22, {128, 32}, 2}; }

void ModelArch::validate() const {
    if (input_dim == 0) throw ConfigError("model input_dim must be positive");
    if (output_dim < 2) throw ConfigError("model output_dim must be at least 2");
    for (auto h : hidden_dims)
        if (h == 0) throw ConfigError("hidden layer sizes must be positive");
}

std::vector<std::pair<std::size_t, std::size_t>> ModelArch::layer_shapes() const {
    std::vector<std::pair<std::size_t, std::size_t>> shapes;
    std::size_t in = input_dim;
    for (auto h : hidden_dims) {
        shapes.emplace_back(h, in);
        in = h;
    }
    shapes.emplace_back(output_dim, in);
    return shapes;
}

ModelParams ModelParams::zeros(const ModelArch& arch) {
    arch.validate();
    ModelParams p{arch, {}};
    for (auto [out, in] : arch.layer_shapes()) {
        p.layers.push_back(Layer{Matrix::Zero(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in)),
                                 Vector::Zero(static_cast<Eigen::Index>(out))});
    }
    return p;
}

std::size_t ModelParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
    return n;
}

bool ModelParams::all_finite() const {
    return std::all_of(layers.begin(), layers.end(),
                       [](const Layer& l) { return l.weights.allFinite() && l.bias.allFinite(); });
}

bool ModelParams::same_shape(const ModelParams& other) const {
    if (layers.size() != other.layers.size()) return false;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& a = layers[i];
        const auto& b = other.layers[i];
        if (a.weights.rows() != b.weights.rows() || a.weights.cols() != b.weights.cols() ||
            a.bias.size() != b.bias.size())
            return false;
    }
    return true;
}

bool operator==(const ModelParams& a, const ModelParams& b) {
    if (!a.same_shape(b)) return false;
    for (std::size_t i = 0; i < a.layers.size(); ++i) {
        if (a.layers[i].weights != b.layers[i].weights || a.layers[i].bias != b.layers[i].bias) return false;
    }
    return true;
}

void TrainConfig::validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
        throw ConfigError("learning_rate must be a finite non-negative number");
    if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
    if (local_epochs == 0) throw ConfigError("local_epochs must be at least 1");
}

ModelParams init_params(const ModelArch& arch, std::uint64_t seed) {
    ModelParams p = ModelParams::zeros(arch);
    Rng rng(seed);
    for (auto& layer : p.layers) {
        const double limit = std::sqrt(6.0 / static_cast<double>(layer.weights.cols()));
        std::uniform_real_distribution<double> dist(-limit, limit);
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) layer.weights(r, c) = dist(rng);
    }
    return p;
}

namespace {

void check_input(const ModelParams& params, Eigen::Index cols) {
    if (params.layers.empty()) throw InputError("model has no layers");
    if (cols != params.layers.front().weights.cols()) {
        std::ostringstream msg;
        msg << "feature dimension " << cols << " does not match model input_dim "
            << params.layers.front().weights.cols();
        throw InputError(msg.str());
    }
}

void check_labels(std::span<const Label> labels, std::size_t rows, Eigen::Index classes) {
    if (labels.size() != rows) throw InputError("label count does not match feature rows");
    for (auto y : labels)
        if (static_cast<Eigen::Index>(y) >= classes) throw InputError("label out of range for output layer");
}

// In-place row-wise softmax; returns per-row log-sum-exp of the logits.
Vector softmax_rows(Matrix& logits) {
    Vector lse(logits.rows());
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        auto row = logits.row(r);
        const double m = row.maxCoeff();
        row.array() = (row.array() - m).exp();
        const double s = row.sum();
        row /= s;
        lse(r) = m + std::log(s);
    }
    return lse;
}

struct ForwardPass {
    std::vector<Matrix> pre;   // pre-activations per layer
    std::vector<Matrix> post;  // activations; post[0] is the input
    Vector lse;                // log-sum-exp of output logits
};

ForwardPass run_forward(const ModelParams& params, const Matrix& x) {
    ForwardPass fp;
    fp.post.push_back(x);
    const std::size_t n_layers = params.layers.size();
    for (std::size_t l = 0; l < n_layers; ++l) {
        const auto& layer = params.layers[l];
        Matrix z = fp.post.back() * layer.weights.transpose();
        z.rowwise() += layer.bias.transpose();
        fp.pre.push_back(z);
        if (l + 1 < n_layers) {
            fp.post.push_back(z.cwiseMax(0.0));
        } else {
            Matrix logits = z;
            fp.lse = softmax_rows(logits);
            fp.post.push_back(std::move(logits));
        }
    }
    return fp;
}

double mean_cross_entropy(const ForwardPass& fp, std::span<const Label> labels) {
    const Matrix& logits = fp.pre.back();
    double total = 0.0;
    for (std::size_t r = 0; r < labels.size(); ++r) {
        const auto i = static_cast<Eigen::Index>(r);
        total += fp.lse(i) - logits(i, labels[r]);
    }
    return total / static_cast<double>(labels.size());
}

}  // namespace

Matrix forward_batch(const ModelParams& params, const Matrix& features) {
    check_input(params, features.cols());
    return run_forward(params, features).post.back();
}

std::vector<double> forward(const ModelParams& params, std::span<const double> features) {
    Matrix x(1, static_cast<Eigen::Index>(features.size()));
    for (std::size_t i = 0; i < features.size(); ++i) x(0, static_cast<Eigen::Index>(i)) = features[i];
    Matrix p = forward_batch(params, x);
    return {p.data(), p.data() + p.size()};
}

double loss(const ModelParams& params, const Matrix& features, std::span<const Label> labels) {
    check_input(params, features.cols());
    check_labels(labels, static_cast<std::size_t>(features.rows()), params.layers.back().weights.rows());
    if (labels.empty()) throw PreconditionError("loss of an empty batch");
    return mean_cross_entropy(run_forward(params, features), labels);
}

LossAndGradients loss_and_gradients(const ModelParams& params, const Matrix& features,
                                    std::span<const Label> labels) {
    check_input(params, features.cols());
    check_labels(labels, static_cast<std::size_t>(features.rows()), params.layers.back().weights.rows());
    if (labels.empty()) throw PreconditionError("gradients of an empty batch");

    const ForwardPass fp = run_forward(params, features);
    LossAndGradients out{mean_cross_entropy(fp, labels), ModelParams::zeros(params.arch)};

    const double inv_n = 1.0 / static_cast<double>(labels.size());
    Matrix delta = fp.post.back();
    for (std::size_t r = 0; r < labels.size(); ++r) delta(static_cast<Eigen::Index>(r), labels[r]) -= 1.0;
    delta *= inv_n;

    for (std::size_t l = params.layers.size(); l-- > 0;) {
        auto& g = out.gradients.layers[l];
        g.weights.noalias() = delta.transpose() * fp.post[l];
        g.bias = delta.colwise().sum().transpose();
        if (l == 0) break;
        Matrix upstream = delta * params.layers[l].weights;
        delta = upstream.array() * (fp.pre[l - 1].array() > 0.0).cast<double>();
    }
    return out;
}

TrainStats train_local(ModelParams& params, const LabeledRows& data, const TrainConfig& cfg) {
    cfg.validate();
    if (data.empty()) throw PreconditionError("train_local called with an empty dataset");
    check_input(params, data.features.cols());
    check_labels(data.labels, static_cast<std::size_t>(data.features.rows()), params.layers.back().weights.rows());

    TrainStats stats;
    const std::size_t n = data.size();
    std::vector<Eigen::Index> order(n);
    std::vector<Label> batch_labels;
    Matrix batch;

    for (std::size_t epoch = 0; epoch < cfg.local_epochs; ++epoch) {
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        Rng rng(derive_seed(cfg.seed, {epoch}));
        std::shuffle(order.begin(), order.end(), rng);

        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t stop = std::min(n, start + cfg.batch_size);
            std::span<const Eigen::Index> idx(order.data() + start, stop - start);
            batch = data.features(idx, Eigen::all);
            batch_labels.clear();
            for (auto i : idx) batch_labels.push_back(data.labels[static_cast<std::size_t>(i)]);

            auto [batch_loss, grads] = loss_and_gradients(params, batch, batch_labels);
            if (!std::isfinite(batch_loss) || !grads.all_finite()) {
                std::ostringstream msg;
                msg << "non-finite training loss at epoch " << epoch << ", batch starting at row " << start
                    << " (loss=" << batch_loss << ", learning_rate=" << cfg.learning_rate << ")";
                throw NumericError(msg.str());
            }
            if (cfg.learning_rate != 0.0) {
                for (std::size_t l = 0; l < params.layers.size(); ++l) {
                    params.layers[l].weights.noalias() -= cfg.learning_rate * grads.layers[l].weights;
                    params.layers[l].bias.noalias() -= cfg.learning_rate * grads.layers[l].bias;
                }
            }
            epoch_loss += batch_loss * static_cast<double>(stop - start);
        }
        stats.epoch_losses.push_back(epoch_loss / static_cast<double>(n));
    }
    if (!params.all_finite()) throw NumericError("parameters became non-finite during training");
    return stats;
}

double evaluate(const ModelParams& params, const LabeledRows& data) {
    if (data.empty()) throw PreconditionError("evaluate called with an empty dataset");
    check_labels(data.labels, static_cast<std::size_t>(data.features.rows()), params.layers.back().weights.rows());
    const Matrix probs = forward_batch(params, data.features);
    std::size_t correct = 0;
    for (Eigen::Index r = 0; r < probs.rows(); ++r) {
        Eigen::Index best = 0;
        for (Eigen::Index c = 1; c < probs.cols(); ++c)
            if (probs(r, c) > probs(r, best)) best = c;
        if (best == static_cast<Eigen::Index>(data.labels[static_cast<std::size_t>(r)])) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

ModelParams federated_average(const ModelParams& own, std::span<const ModelParams* const> received,
                              std::span<const double> weights) {
    for (const auto* m : received) {
        if (m->arch != own.arch || !m->same_shape(own))
            throw AggregationError("cannot average models with different architectures");
    }
    if (!weights.empty() && weights.size() != received.size() + 1)
        throw PreconditionError("aggregation weights must cover own model plus every received model");
    if (received.empty()) return own;

    if (weights.empty()) {
        ModelParams sum = own;
        for (const auto* m : received) {
            for (std::size_t l = 0; l < sum.layers.size(); ++l) {
                sum.layers[l].weights += m->layers[l].weights;
                sum.layers[l].bias += m->layers[l].bias;
            }
        }
        const double count = static_cast<double>(received.size() + 1);
        for (auto& layer : sum.layers) {
            layer.weights /= count;
            layer.bias /= count;
        }
        return sum;
    }

    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw PreconditionError("aggregation weights must be finite and >= 0");
        total += w;
    }
    if (total <= 0.0) throw PreconditionError("aggregation weights sum to zero");

    ModelParams acc = ModelParams::zeros(own.arch);
    auto accumulate = [&acc](const ModelParams& m, double w) {
        for (std::size_t l = 0; l < acc.layers.size(); ++l) {
            acc.layers[l].weights += w * m.layers[l].weights;
            acc.layers[l].bias += w * m.layers[l].bias;
        }
    };
    accumulate(own, weights[0]);
    for (std::size_t i = 0; i < received.size(); ++i) accumulate(*received[i], weights[i + 1]);
    for (auto& layer : acc.layers) {
        layer.weights /= total;
        layer.bias /= total;
    }
    return acc;
}

ModelParams federated_average(const ModelParams& own, const std::vector<ModelParams>& received,
                              std::span<const double> weights) {
    std::vector<const ModelParams*> ptrs;
    ptrs.reserve(received.size());
    for (const auto& m : received) ptrs.push_back(&m);
    return federated_average(own, ptrs, weights);
}

namespace {

constexpr char kMagic[4] = {'D', 'F', 'L', 'P'};
constexpr std::uint32_t kFormatVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::ostream& out, double d) {
    const auto v = std::bit_cast<std::uint64_t>(d);
    for (int i = 0; i < 8; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_bytes(std::istream& in, int count) {
    std::uint64_t v = 0;
    for (int i = 0; i < count; ++i) {
        const int c = in.get();
        if (c == std::char_traits<char>::eof()) throw InputError("truncated model parameter stream");
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
    }
    return v;
}

std::uint32_t get_u32(std::istream& in) { return static_cast<std::uint32_t>(get_bytes(in, 4)); }
double get_f64(std::istream& in) { return std::bit_cast<double>(get_bytes(in, 8)); }

}  // namespace

void write_params(std::ostream& out, const ModelParams& params) {
    out.write(kMagic, 4);
    put_u32(out, kFormatVersion);
    put_u32(out, static_cast<std::uint32_t>(params.arch.input_dim));
    put_u32(out, static_cast<std::uint32_t>(params.layers.size()));
    for (const auto& layer : params.layers) {
        put_u32(out, static_cast<std::uint32_t>(layer.weights.rows()));
        put_u32(out, static_cast<std::uint32_t>(layer.weights.cols()));
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) put_f64(out, layer.weights(r, c));
        for (Eigen::Index r = 0; r < layer.bias.size(); ++r) put_f64(out, layer.bias(r));
    }
}

ModelParams read_params(std::istream& in) {
    char magic[4];
    if (!in.read(magic, 4) || !std::equal(magic, magic + 4, kMagic)) throw InputError("not a model parameter stream");
    if (get_u32(in) != kFormatVersion) throw InputError("unsupported model parameter format version");
    ModelArch arch;
    arch.input_dim = get_u32(in);
    arch.hidden_dims.clear();
    const std::uint32_t n_layers = get_u32(in);
    if (n_layers == 0) throw InputError("model parameter stream has no layers");

    std::vector<Layer> layers;
    std::size_t expected_in = arch.input_dim;
    for (std::uint32_t l = 0; l < n_layers; ++l) {
        const auto rows = get_u32(in);
        const auto cols = get_u32(in);
        if (cols != expected_in || rows == 0) throw InputError("inconsistent layer shapes in model parameter stream");
        Layer layer{Matrix(rows, cols), Vector(rows)};
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) layer.weights(r, c) = get_f64(in);
        for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias(r) = get_f64(in);
        if (l + 1 < n_layers) arch.hidden_dims.push_back(rows);
        else arch.output_dim = rows;
        expected_in = rows;
        layers.push_back(std::move(layer));
    }
    return ModelParams{std::move(arch), std::move(layers)};
}

}  // namespace dflsim::nn
