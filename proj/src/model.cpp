#include "qdal/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "qdal/kernels.hpp"

namespace qdal {

namespace {

constexpr char kCheckpointMagic[8] = {'Q', 'D', 'A', 'L', 'W', 'T', '0', '1'};

void write_u64(std::ostream& out, std::uint64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) {
        buf[i] = static_cast<unsigned char>(v >> (8 * i));
    }
    out.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t read_u64(std::istream& in) {
    unsigned char buf[8];
    if (!in.read(reinterpret_cast<char*>(buf), 8)) {
        throw std::runtime_error("checkpoint: truncated file");
    }
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
        v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    }
    return v;
}

}  // namespace

void RegressorConfig::validate() const {
    if (input_dim == 0) {
        throw std::invalid_argument("regressor: input_dim must be positive");
    }
    if (std::any_of(hidden_widths.begin(), hidden_widths.end(), [](std::size_t w) { return w == 0; })) {
        throw std::invalid_argument("regressor: hidden widths must be positive");
    }
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
        throw std::invalid_argument("regressor: dropout_rate must lie in [0, 1)");
    }
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        throw std::invalid_argument("regressor: learning_rate must be positive");
    }
    if (!(weight_decay >= 0.0)) {
        throw std::invalid_argument("regressor: weight_decay must be non-negative");
    }
    if (epochs <= 0) {
        throw std::invalid_argument("regressor: epochs must be positive");
    }
    if (batch_size == 0) {
        throw std::invalid_argument("regressor: batch_size must be positive");
    }
    if (!(warmup_ratio >= 0.0 && warmup_ratio <= 1.0)) {
        throw std::invalid_argument("regressor: warmup_ratio must lie in [0, 1]");
    }
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(adam_eps > 0.0)) {
        throw std::invalid_argument("regressor: invalid Adam moment constants");
    }
}

RegressorConfig RegressorConfig::fine_tuning_preset(std::size_t input_dim) {
    RegressorConfig c;
    c.input_dim = input_dim;
    c.learning_rate = kFineTuningLearningRate;
    return c;
}

std::vector<const Example*> as_pointers(std::span<const Example> examples) {
    std::vector<const Example*> out;
    out.reserve(examples.size());
    for (const auto& ex : examples) {
        out.push_back(&ex);
    }
    return out;
}

struct Regressor::Workspace {
    std::vector<std::vector<double>> z;  // pre-activation per layer
    std::vector<std::vector<double>> a;  // activation after ReLU and dropout (hidden layers)
    std::vector<double> masks;           // concatenated hidden-unit masks, already scaled
    std::vector<double> delta;
    std::vector<double> delta_prev;
    bool dropout = false;

    explicit Workspace(const std::vector<Layer>& layers, std::size_t width) {
        std::size_t hidden = 0;
        for (std::size_t l = 0; l < layers.size(); ++l) {
            z.emplace_back(layers[l].out);
            a.emplace_back(layers[l].out);
            if (l + 1 < layers.size()) {
                hidden += layers[l].out;
            }
        }
        masks.assign(hidden, 1.0);
        delta.assign(width, 0.0);
        delta_prev.assign(width, 0.0);
    }
};

Regressor::Regressor(RegressorConfig config) : config_(std::move(config)) {
    config_.validate();
    std::size_t in = config_.input_dim;
    std::size_t offset = 0;
    auto add_layer = [&](std::size_t out) {
        Layer layer{in, out, offset, offset + in * out};
        offset += in * out + out;
        layers_.push_back(layer);
        in = out;
    };
    for (const auto w : config_.hidden_widths) {
        add_layer(w);
    }
    add_layer(1);

    params_.assign(offset, 0.0);
    Rng init_rng = make_rng(config_.seed, {stream::kModelInit});
    for (const auto& layer : layers_) {
        std::normal_distribution<double> he(0.0, std::sqrt(2.0 / static_cast<double>(layer.in)));
        for (std::size_t i = 0; i < layer.in * layer.out; ++i) {
            params_[layer.weight_offset + i] = he(init_rng);
        }
    }
    initial_params_ = params_;
    reinitialize();
}

void Regressor::reinitialize() {
    params_ = initial_params_;
    adam_m_.assign(params_.size(), 0.0);
    adam_v_.assign(params_.size(), 0.0);
    adam_steps_ = 0;
    train_rng_ = make_rng(config_.seed, {stream::kTraining});
    trained_ = false;
}

std::size_t Regressor::max_width() const {
    std::size_t w = config_.input_dim;
    for (const auto& l : layers_) {
        w = std::max(w, l.out);
    }
    return w;
}

void Regressor::draw_masks(Rng& rng, std::vector<double>& masks) const {
    const double p = config_.dropout_rate;
    const double keep_scale = 1.0 / (1.0 - p);
    for (auto& m : masks) {
        m = uniform_open01(rng) >= p ? keep_scale : 0.0;
    }
}

void Regressor::forward(const double* x, Workspace& ws, Rng* rng, const std::vector<double>* shared_masks) const {
    const auto& k = kernels::active();
    ws.dropout = config_.dropout_rate > 0.0 && (rng != nullptr || shared_masks != nullptr);
    if (ws.dropout) {
        if (shared_masks != nullptr) {
            ws.masks = *shared_masks;
        } else {
            draw_masks(*rng, ws.masks);
        }
    }
    const double* input = x;
    std::size_t mask_offset = 0;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& layer = layers_[l];
        auto& z = ws.z[l];
        auto& a = ws.a[l];
        k.gemv(params_.data() + layer.weight_offset, input, params_.data() + layer.bias_offset, z.data(), layer.out,
               layer.in);
        if (l + 1 == layers_.size()) {
            a[0] = z[0];
            break;
        }
        for (std::size_t j = 0; j < layer.out; ++j) {
            const double r = z[j] > 0.0 ? z[j] : 0.0;
            a[j] = ws.dropout ? r * ws.masks[mask_offset + j] : r;
        }
        mask_offset += layer.out;
        input = a.data();
    }
}

double Regressor::backward(const double* x, double target, Workspace& ws, std::vector<double>& grad,
                           double scale) const {
    const auto& k = kernels::active();
    const double pred = ws.a.back()[0];
    const double err = pred - target;

    // Offsets of each hidden layer's mask block.
    std::vector<std::size_t> mask_offsets(layers_.size(), 0);
    for (std::size_t l = 1; l < layers_.size(); ++l) {
        mask_offsets[l] = mask_offsets[l - 1] + layers_[l - 1].out;
    }

    ws.delta[0] = 2.0 * err * scale;
    for (std::size_t li = layers_.size(); li-- > 0;) {
        const auto& layer = layers_[li];
        const double* input = li == 0 ? x : ws.a[li - 1].data();
        k.outer_acc(ws.delta.data(), input, grad.data() + layer.weight_offset, layer.out, layer.in);
        k.axpy(1.0, ws.delta.data(), grad.data() + layer.bias_offset, layer.out);
        if (li == 0) {
            break;
        }
        std::fill_n(ws.delta_prev.begin(), layer.in, 0.0);
        k.gemv_t_acc(params_.data() + layer.weight_offset, ws.delta.data(), ws.delta_prev.data(), layer.out,
                     layer.in);
        const auto& z_prev = ws.z[li - 1];
        const std::size_t moff = mask_offsets[li - 1];
        for (std::size_t j = 0; j < layer.in; ++j) {
            double d = z_prev[j] > 0.0 ? ws.delta_prev[j] : 0.0;
            if (ws.dropout) {
                d *= ws.masks[moff + j];
            }
            ws.delta[j] = d;
        }
    }
    return err * err;
}

double Regressor::predict_one(std::span<const double> features) const {
    if (features.size() != config_.input_dim) {
        throw std::invalid_argument("predict: expected " + std::to_string(config_.input_dim) + " features, got " +
                                    std::to_string(features.size()));
    }
    Workspace ws(layers_, max_width());
    forward(features.data(), ws, nullptr, nullptr);
    return ws.a.back()[0];
}

std::vector<double> Regressor::predict(std::span<const Example* const> examples) const {
    Workspace ws(layers_, max_width());
    std::vector<double> out;
    out.reserve(examples.size());
    for (const auto* ex : examples) {
        if (ex->features.size() != config_.input_dim) {
            throw std::invalid_argument("predict: feature dimension mismatch for example '" + ex->id + "'");
        }
        forward(ex->features.data(), ws, nullptr, nullptr);
        out.push_back(ws.a.back()[0]);
    }
    return out;
}

std::vector<double> Regressor::predict(std::span<const Example> examples) const {
    const auto ptrs = as_pointers(examples);
    return predict(ptrs);
}

SampleMatrix Regressor::mc_predict(std::span<const Example* const> examples, int passes, Rng& rng) const {
    if (passes < 1) {
        throw std::invalid_argument("mc_predict: at least one pass is required");
    }
    SampleMatrix out;
    out.passes = static_cast<std::size_t>(passes);
    out.candidates = examples.size();
    out.values.resize(out.passes * out.candidates);

    Workspace ws(layers_, max_width());
    std::vector<double> shared(ws.masks.size(), 1.0);
    const bool per_pass = config_.mask_mode == MaskMode::per_pass;
    for (std::size_t t = 0; t < out.passes; ++t) {
        if (per_pass && config_.dropout_rate > 0.0) {
            draw_masks(rng, shared);
        }
        for (std::size_t i = 0; i < examples.size(); ++i) {
            const auto* ex = examples[i];
            if (ex->features.size() != config_.input_dim) {
                throw std::invalid_argument("mc_predict: feature dimension mismatch for example '" + ex->id + "'");
            }
            forward(ex->features.data(), ws, per_pass ? nullptr : &rng, per_pass ? &shared : nullptr);
            out.values[t * out.candidates + i] = ws.a.back()[0];
        }
    }
    return out;
}

SampleMatrix Regressor::mc_predict(std::span<const Example> examples, int passes, Rng& rng) const {
    const auto ptrs = as_pointers(examples);
    return mc_predict(ptrs, passes, rng);
}

double Regressor::mse(std::span<const Example* const> examples) const {
    if (examples.empty()) {
        throw std::invalid_argument("mse: empty example set");
    }
    const auto preds = predict(examples);
    double s = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const double d = preds[i] - examples[i]->level.as_target();
        s += d * d;
    }
    return s / static_cast<double>(preds.size());
}

std::pair<double, std::vector<double>> Regressor::loss_and_gradient(std::span<const Example* const> examples) const {
    if (examples.empty()) {
        throw std::invalid_argument("loss_and_gradient: empty example set");
    }
    Workspace ws(layers_, max_width());
    std::vector<double> grad(params_.size(), 0.0);
    const double scale = 1.0 / static_cast<double>(examples.size());
    double loss = 0.0;
    for (const auto* ex : examples) {
        forward(ex->features.data(), ws, nullptr, nullptr);
        loss += backward(ex->features.data(), ex->level.as_target(), ws, grad, scale);
    }
    return {loss * scale, std::move(grad)};
}

TrainReport Regressor::train(std::span<const Example* const> labeled, std::span<const Example* const> val) {
    if (labeled.empty()) {
        throw std::invalid_argument("train: labeled set is empty");
    }
    if (val.empty()) {
        throw std::invalid_argument("train: validation set is empty");
    }
    for (const auto* ex : labeled) {
        if (ex->features.size() != config_.input_dim) {
            throw std::invalid_argument("train: feature dimension mismatch for example '" + ex->id + "'");
        }
    }
    const auto& k = kernels::active();

    TrainReport report;
    report.initial_train_mse = mse(labeled);

    const std::size_t n = labeled.size();
    const std::size_t bs = std::min(config_.batch_size, n);
    const std::size_t steps_per_epoch = (n + bs - 1) / bs;
    const std::size_t total_steps = steps_per_epoch * static_cast<std::size_t>(config_.epochs);
    const auto warmup_steps =
        static_cast<std::size_t>(std::ceil(config_.warmup_ratio * static_cast<double>(total_steps)));

    // Linear warmup, then linear decay towards zero.
    auto lr_at = [&](std::size_t step) {
        if (step < warmup_steps) {
            return config_.learning_rate * static_cast<double>(step + 1) / static_cast<double>(warmup_steps);
        }
        return config_.learning_rate * static_cast<double>(total_steps - step) /
               static_cast<double>(total_steps - warmup_steps);
    };

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) {
        order[i] = i;
    }
    Workspace ws(layers_, max_width());
    std::vector<double> grad(params_.size());
    std::vector<double> best_params = params_;
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t step = 0;

    for (int epoch = 0; epoch < config_.epochs; ++epoch) {
        for (std::size_t i = n; i > 1; --i) {
            std::swap(order[i - 1], order[uniform_index(train_rng_, i)]);
        }
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n; start += bs, ++step) {
            const std::size_t end = std::min(start + bs, n);
            const double scale = 1.0 / static_cast<double>(end - start);
            std::fill(grad.begin(), grad.end(), 0.0);
            double batch_loss = 0.0;
            for (std::size_t b = start; b < end; ++b) {
                const auto* ex = labeled[order[b]];
                forward(ex->features.data(), ws, &train_rng_, nullptr);
                batch_loss += backward(ex->features.data(), ex->level.as_target(), ws, grad, scale);
            }
            if (!std::isfinite(batch_loss)) {
                throw TrainingDiverged(epoch, "train: non-finite loss in epoch " + std::to_string(epoch));
            }
            epoch_loss += batch_loss;

            ++adam_steps_;
            kernels::AdamWParams hp;
            hp.lr = lr_at(step);
            hp.beta1 = config_.beta1;
            hp.beta2 = config_.beta2;
            hp.eps = config_.adam_eps;
            hp.bias_correction1 = 1.0 - std::pow(config_.beta1, static_cast<double>(adam_steps_));
            hp.bias_correction2 = 1.0 - std::pow(config_.beta2, static_cast<double>(adam_steps_));
            for (const auto& layer : layers_) {
                hp.weight_decay = config_.weight_decay;
                const std::size_t nw = layer.in * layer.out;
                k.adamw_step(params_.data() + layer.weight_offset, grad.data() + layer.weight_offset,
                             adam_m_.data() + layer.weight_offset, adam_v_.data() + layer.weight_offset, nw, hp);
                hp.weight_decay = 0.0;  // biases are not decayed
                k.adamw_step(params_.data() + layer.bias_offset, grad.data() + layer.bias_offset,
                             adam_m_.data() + layer.bias_offset, adam_v_.data() + layer.bias_offset, layer.out, hp);
            }
        }
        report.train_loss.push_back(epoch_loss / static_cast<double>(n));

        const double v = mse(val);
        if (!std::isfinite(v)) {
            throw TrainingDiverged(epoch, "train: non-finite validation loss in epoch " + std::to_string(epoch));
        }
        report.val_loss.push_back(v);
        if (v < best_val) {
            best_val = v;
            best_params = params_;
            report.best_epoch = epoch;
        }
    }
    params_ = std::move(best_params);
    trained_ = true;
    report.final_train_mse = mse(labeled);
    return report;
}

TrainReport Regressor::train(std::span<const Example> labeled, std::span<const Example> val) {
    const auto l = as_pointers(labeled);
    const auto v = as_pointers(val);
    return train(l, v);
}

void Regressor::set_parameters(std::span<const double> values) {
    if (values.size() != params_.size()) {
        throw std::invalid_argument("set_parameters: expected " + std::to_string(params_.size()) + " values");
    }
    params_.assign(values.begin(), values.end());
}

std::string Regressor::summary() const {
    std::ostringstream os;
    os << "Regressor(" << config_.input_dim;
    for (const auto w : config_.hidden_widths) {
        os << " -> " << w;
    }
    os << " -> 1, params=" << parameter_count() << ", dropout=" << config_.dropout_rate
       << ", lr=" << config_.learning_rate << ", weight_decay=" << config_.weight_decay
       << ", epochs=" << config_.epochs << ", batch=" << config_.batch_size << ")";
    return os.str();
}

void Regressor::save_weights(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("checkpoint: cannot open '" + path.string() + "' for writing");
    }
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    write_u64(out, layers_.size());
    for (const auto& layer : layers_) {
        write_u64(out, layer.in);
        write_u64(out, layer.out);
    }
    for (const double v : params_) {
        write_u64(out, std::bit_cast<std::uint64_t>(v));
    }
    if (!out) {
        throw std::runtime_error("checkpoint: write failed for '" + path.string() + "'");
    }
}

void Regressor::load_weights(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("checkpoint: cannot open '" + path.string() + "'");
    }
    char magic[sizeof(kCheckpointMagic)];
    if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
        throw std::runtime_error("checkpoint: bad magic in '" + path.string() + "'");
    }
    if (read_u64(in) != layers_.size()) {
        throw std::runtime_error("checkpoint: layer count mismatch");
    }
    for (const auto& layer : layers_) {
        const auto lin = read_u64(in);
        const auto lout = read_u64(in);
        if (lin != layer.in || lout != layer.out) {
            throw std::runtime_error("checkpoint: layer dimensions mismatch");
        }
    }
    std::vector<double> values(params_.size());
    for (auto& v : values) {
        v = std::bit_cast<double>(read_u64(in));
    }
    params_ = std::move(values);
}

}  // namespace qdal
