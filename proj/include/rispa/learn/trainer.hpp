// SPDX-License-Identifier: Apache-2.0
//
// rispa: channel estimation with reduced RIS phase allocations

#ifndef RISPA_LEARN_TRAINER_HPP
#define RISPA_LEARN_TRAINER_HPP

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rispa/learn/cnn.hpp"

namespace rispa::learn {

struct TrainConfig {
    std::size_t allocations = 4;
    CnnArch arch;
    std::size_t batch_size = 64;
    double learning_rate = 1e-3;
    std::size_t epochs = 20;
    // Multiplies the learning rate after every epoch.
    double lr_decay = 1.0;
    double snr_db = 20.0;
    // When set, every minibatch draws its SNR uniformly from [snr_db, snr_max_db].
    std::optional<double> snr_max_db;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    bool lock_first_row = true;
    std::uint64_t seed = 1;

    void validate() const;
};

struct EpochLog {
    std::size_t epoch = 0;
    double train_loss = 0.0; // mean batch loss divided by M (L+1)
    double val_nmse = 0.0;   // NaN without a validation set
};

struct TrainResult {
    PhaseCnnModel model;
    std::vector<EpochLog> log;
};

// Adam over a flat list of parameter tensors.
class Adam {
public:
    Adam(double learning_rate, double beta1, double beta2, double eps);

    void set_learning_rate(double lr) noexcept { lr_ = lr; }
    double learning_rate() const noexcept { return lr_; }

    // params[i] and grads[i] must keep their sizes across calls.
    void step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads);

private:
    double lr_, beta1_, beta2_, eps_;
    std::size_t t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

// Loss and full gradient of one minibatch, exposed for gradient checking.
struct BatchEvaluation {
    double loss = 0.0; // mean over the batch of ||H - Hhat||_F^2
    RMatrix phase_grad;
    CnnGradients cnn_grads;
    ForwardCache cache;
};

// Y = H V_NN + N, Hhat = CNN(Y), loss = mean ||H - Hhat||_F^2, all gradients.
BatchEvaluation evaluate_batch(const PhaseCnnModel& model, std::span<const CMatrix> channels,
                               std::span<const CMatrix> noise, Mode mode);

// Scalar loss only (no backward pass).
double batch_loss(const PhaseCnnModel& model, std::span<const CMatrix> channels, std::span<const CMatrix> noise,
                  Mode mode);

// Jointly trains the phase layer and the CNN on `train`; `validation` may be empty.
TrainResult train_joint(std::span<const CMatrix> train, std::span<const CMatrix> validation, const TrainConfig& config);

// NMSE of the CNN with its own learned phases on `channels`, noise seeded per sample.
double evaluate_nmse(const PhaseCnnModel& model, std::span<const CMatrix> channels, double snr_db, std::uint64_t seed);

struct HyperRanges {
    std::size_t batch_log2_min = 5;
    std::size_t batch_log2_max = 11;
    double lr_min = 1e-5;
    double lr_max = 1e-1;
    std::vector<Activation> activations{Activation::relu, Activation::tanh, Activation::sigmoid, Activation::silu,
                                        Activation::elu};
    bool allow_batch_norm = true;
    std::size_t kernels_min = 16;
    std::size_t kernels_max = 512;
    std::size_t layers_min = 3;
    std::size_t layers_max = 9;

    void validate() const;
};

// Draws one configuration: powers of two for the batch size, log-uniform learning
// rate, uniform integers for kernels and layers.
TrainConfig sample_config(const TrainConfig& base, const HyperRanges& ranges, Rng& rng);

struct Trial {
    TrainConfig config;
    bool failed = false;
    std::string failure;
    double val_nmse = 0.0;
};

struct HyperSearchResult {
    TrainConfig best_config;
    TrainResult best;
    std::vector<Trial> trials;
};

using Trainer = std::function<TrainResult(std::span<const CMatrix>, std::span<const CMatrix>, const TrainConfig&)>;

// Trains `trials` sampled configurations and keeps the one with the lowest
// final validation NMSE. Trials that throw TrainingError are recorded and skipped.
HyperSearchResult hyper_search(std::span<const CMatrix> train, std::span<const CMatrix> validation,
                               const TrainConfig& base, const HyperRanges& ranges, std::size_t trials,
                               std::uint64_t seed, const Trainer& trainer = train_joint);

// The learned phases as a PhaseMatrix. With an unlocked first row each column
// is rotated by the conjugate of its first entry, which leaves estimation
// performance unchanged for circularly-symmetric noise.
PhaseMatrix export_phases(const PhaseCnnModel& model);

// "RCNN" checkpoint and the `epoch,train_loss,val_nmse` training log.
inline constexpr std::uint16_t checkpoint_format_version = 1;
void save_checkpoint(const PhaseCnnModel& model, const std::filesystem::path& path);
PhaseCnnModel load_checkpoint(const std::filesystem::path& path);
void write_training_log(const std::vector<EpochLog>& log, const std::filesystem::path& path);

} // namespace rispa::learn

#endif
