#pragma once

// Dropout feed-forward regressor with deterministic and MC-dropout prediction.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qdal/core.hpp"
#include "qdal/rng.hpp"

namespace qdal {

/// How MC-dropout masks are drawn: independently for every example in a pass, or one
/// mask per pass shared by all examples (one thinned network per pass).
enum class MaskMode { per_example, per_pass };

struct RegressorConfig {
    static constexpr double kFineTuningLearningRate = 2e-5;

    std::size_t input_dim = 0;
    std::vector<std::size_t> hidden_widths{64, 64};
    double dropout_rate = 0.1;
    double learning_rate = 1e-3;
    double weight_decay = 0.05;
    int epochs = 10;
    std::size_t batch_size = 64;
    double warmup_ratio = 0.1;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    MaskMode mask_mode = MaskMode::per_example;
    std::uint64_t seed = 0;

    /// Throws std::invalid_argument describing the first violated constraint.
    void validate() const;

    /// Same architecture with the small fine-tuning learning rate.
    static RegressorConfig fine_tuning_preset(std::size_t input_dim);
};

/// T x N matrix of MC-dropout predictions, row-major (one row per pass).
struct SampleMatrix {
    std::size_t passes = 0;
    std::size_t candidates = 0;
    std::vector<double> values;

    [[nodiscard]] double at(std::size_t pass, std::size_t candidate) const {
        return values[pass * candidates + candidate];
    }
    [[nodiscard]] std::span<const double> row(std::size_t pass) const {
        return {values.data() + pass * candidates, candidates};
    }
};

struct TrainReport {
    std::vector<double> train_loss;  // mean minibatch MSE per epoch, dropout on
    std::vector<double> val_loss;    // validation MSE per epoch, dropout off
    int best_epoch = -1;             // 0-based
    double initial_train_mse = 0.0;
    double final_train_mse = 0.0;    // after restoring the best epoch
};

class TrainingDiverged : public std::runtime_error {
public:
    TrainingDiverged(int epoch, const std::string& what)
        : std::runtime_error(what), epoch_(epoch) {}
    [[nodiscard]] int epoch() const noexcept { return epoch_; }

private:
    int epoch_;
};

class Regressor {
public:
    /// He-initialised network; the initial weights are kept for reinitialize().
    explicit Regressor(RegressorConfig config);

    /// Restores the initial weights, clears optimizer state and the training stream.
    void reinitialize();

    TrainReport train(std::span<const Example* const> labeled, std::span<const Example* const> val);
    TrainReport train(std::span<const Example> labeled, std::span<const Example> val);

    /// Deterministic forward pass, dropout off.
    [[nodiscard]] double predict_one(std::span<const double> features) const;
    [[nodiscard]] std::vector<double> predict(std::span<const Example* const> examples) const;
    [[nodiscard]] std::vector<double> predict(std::span<const Example> examples) const;

    /// `passes` stochastic forward passes with dropout active.
    [[nodiscard]] SampleMatrix mc_predict(std::span<const Example* const> examples, int passes, Rng& rng) const;
    [[nodiscard]] SampleMatrix mc_predict(std::span<const Example> examples, int passes, Rng& rng) const;

    /// Mean squared error against the level targets, dropout off.
    [[nodiscard]] double mse(std::span<const Example* const> examples) const;

    /// MSE and its exact gradient with respect to parameters(), dropout off.
    [[nodiscard]] std::pair<double, std::vector<double>> loss_and_gradient(
        std::span<const Example* const> examples) const;

    [[nodiscard]] std::size_t parameter_count() const noexcept { return params_.size(); }
    /// Flat view: for each layer, row-major weights (out x in) then biases.
    [[nodiscard]] const std::vector<double>& parameters() const noexcept { return params_; }
    [[nodiscard]] const std::vector<double>& initial_parameters() const noexcept { return initial_params_; }
    void set_parameters(std::span<const double> values);

    [[nodiscard]] const RegressorConfig& config() const noexcept { return config_; }
    [[nodiscard]] bool is_trained() const noexcept { return trained_; }
    [[nodiscard]] std::string summary() const;

    /// Binary checkpoint: magic, layer count, (in, out) per layer, then little-endian doubles.
    void save_weights(const std::filesystem::path& path) const;
    /// Throws if the file's layer dimensions differ from this network's.
    void load_weights(const std::filesystem::path& path);

private:
    struct Layer {
        std::size_t in = 0;
        std::size_t out = 0;
        std::size_t weight_offset = 0;
        std::size_t bias_offset = 0;
    };

    struct Workspace;

    void forward(const double* x, Workspace& ws, Rng* rng, const std::vector<double>* shared_masks) const;
    double backward(const double* x, double target, Workspace& ws, std::vector<double>& grad, double scale) const;
    void draw_masks(Rng& rng, std::vector<double>& masks) const;
    [[nodiscard]] std::size_t max_width() const;

    RegressorConfig config_;
    std::vector<Layer> layers_;
    std::vector<double> params_;
    std::vector<double> initial_params_;
    std::vector<double> adam_m_;
    std::vector<double> adam_v_;
    std::uint64_t adam_steps_ = 0;
    Rng train_rng_;
    bool trained_ = false;
};

std::vector<const Example*> as_pointers(std::span<const Example> examples);

}  // namespace qdal
