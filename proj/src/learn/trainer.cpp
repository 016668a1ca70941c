// SPDX-License-Identifier: Apache-2.0
//
// rispa: channel estimation with reduced RIS phase allocations

#include "rispa/learn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "rispa/errors.hpp"

namespace rispa::learn {

namespace {

constexpr std::uint64_t validation_stream = 0x76616c6964ULL;

std::vector<std::span<double>> parameter_spans(PhaseCnnModel& model)
{
    std::vector<std::span<double>> out;
    out.emplace_back(model.phase.angles().data(), static_cast<std::size_t>(model.phase.angles().size()));
    for (auto& l : model.cnn.convs) {
        out.emplace_back(l.kernels);
        out.emplace_back(l.biases);
        if (l.batch_norm) {
            out.emplace_back(l.batch_norm->scale);
            out.emplace_back(l.batch_norm->shift);
        }
    }
    out.emplace_back(model.cnn.resize.kernels);
    out.emplace_back(model.cnn.resize.biases);
    return out;
}

std::vector<std::span<const double>> gradient_spans(const PhaseCnnModel& model, const BatchEvaluation& ev)
{
    std::vector<std::span<const double>> out;
    out.emplace_back(ev.phase_grad.data(), static_cast<std::size_t>(ev.phase_grad.size()));
    for (std::size_t i = 0; i < model.cnn.convs.size(); ++i) {
        const auto& g = ev.cnn_grads.convs[i];
        out.emplace_back(g.kernels);
        out.emplace_back(g.biases);
        if (model.cnn.convs[i].batch_norm) {
            out.emplace_back(g.bn_scale);
            out.emplace_back(g.bn_shift);
        }
    }
    out.emplace_back(ev.cnn_grads.resize_kernels);
    out.emplace_back(ev.cnn_grads.resize_biases);
    return out;
}

std::vector<CMatrix> observations(const CMatrix& V, std::span<const CMatrix> channels, std::span<const CMatrix> noise)
{
    if (channels.size() != noise.size())
        throw DimensionError("channel and noise batches differ in size");
    std::vector<CMatrix> Y(channels.size());
    for (std::size_t b = 0; b < channels.size(); ++b) {
        if (channels[b].cols() != V.rows())
            throw DimensionError("channel has " + std::to_string(channels[b].cols()) + " columns, phase layer " +
                                 std::to_string(V.rows()) + " rows");
        Y[b] = channels[b] * V + noise[b];
    }
    return Y;
}

} // namespace

void TrainConfig::validate() const
{
    if (allocations < 1)
        throw ParameterError("allocations must be at least 1");
    if (batch_size < 1)
        throw ParameterError("batch size must be at least 1");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
        throw ParameterError("learning rate must be a finite nonnegative number");
    if (epochs < 1)
        throw ParameterError("at least one epoch is required");
    if (arch.layers < 1 || arch.kernels < 1)
        throw ParameterError("CNN needs at least one layer and one kernel");
    if (snr_max_db && !(*snr_max_db >= snr_db))
        throw ParameterError("SNR range upper bound is below the lower bound");
}

Adam::Adam(double learning_rate, double beta1, double beta2, double eps)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps)
{
}

void Adam::step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads)
{
    if (params.size() != grads.size())
        throw DimensionError("parameter and gradient lists differ in length");
    if (m_.empty()) {
        for (const auto& p : params) {
            m_.emplace_back(p.size(), 0.0);
            v_.emplace_back(p.size(), 0.0);
        }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto p = params[i];
        auto g = grads[i];
        if (p.size() != g.size() || p.size() != m_[i].size())
            throw DimensionError("parameter tensor " + std::to_string(i) + " changed size");
        auto& m = m_[i];
        auto& v = v_[i];
        for (std::size_t j = 0; j < p.size(); ++j) {
            m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
            v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
            p[j] -= lr_ * (m[j] / c1) / (std::sqrt(v[j] / c2) + eps_);
        }
    }
}

BatchEvaluation evaluate_batch(const PhaseCnnModel& model, std::span<const CMatrix> channels,
                               std::span<const CMatrix> noise, Mode mode)
{
    BatchEvaluation ev;
    const CMatrix V = model.phase.forward();
    const auto Y = observations(V, channels, noise);
    const Planes est = cnn_forward(model.cnn, to_planes(Y), mode, &ev.cache);
    const Planes truth = to_planes(channels);
    const double B = static_cast<double>(channels.size());

    Planes upstream(2, est.batch, est.rows, est.cols);
    double loss = 0.0;
    for (std::size_t i = 0; i < est.data.size(); ++i) {
        const double diff = est.data[i] - truth.data[i];
        loss += diff * diff;
        upstream.data[i] = 2.0 * diff / B;
    }
    ev.loss = loss / B;
    ev.cnn_grads = cnn_backward(model.cnn, ev.cache, upstream);

    // dL/dV = sum_b H_b^H G_b with G_b = dL/dRe(Y_b) + j dL/dIm(Y_b)
    const auto G = from_planes(ev.cnn_grads.input);
    CMatrix dV = CMatrix::Zero(V.rows(), V.cols());
    for (std::size_t b = 0; b < channels.size(); ++b)
        dV.noalias() += channels[b].adjoint() * G[b];
    ev.phase_grad = model.phase.backward(dV.real(), dV.imag());
    return ev;
}

double batch_loss(const PhaseCnnModel& model, std::span<const CMatrix> channels, std::span<const CMatrix> noise,
                  Mode mode)
{
    const auto Y = observations(model.phase.forward(), channels, noise);
    const Planes est = cnn_forward(model.cnn, to_planes(Y), mode);
    const Planes truth = to_planes(channels);
    double loss = 0.0;
    for (std::size_t i = 0; i < est.data.size(); ++i) {
        const double diff = est.data[i] - truth.data[i];
        loss += diff * diff;
    }
    return loss / static_cast<double>(channels.size());
}

double evaluate_nmse(const PhaseCnnModel& model, std::span<const CMatrix> channels, double snr_db, std::uint64_t seed)
{
    if (channels.empty())
        throw ParameterError("evaluation set is empty");
    const CMatrix V = model.phase.forward();
    const double noise_variance = snr_to_noise_variance(snr_db);
    std::vector<CMatrix> Y(channels.size());
    for (std::size_t i = 0; i < channels.size(); ++i) {
        Rng rng(derive_seed(seed, i));
        Y[i] = channels[i] * V + draw_noise(static_cast<std::size_t>(channels[i].rows()),
                                            static_cast<std::size_t>(V.cols()), noise_variance, rng);
    }
    const auto est = cnn_estimate(model.cnn, Y);
    return nmse(channels, est);
}

TrainResult train_joint(std::span<const CMatrix> train, std::span<const CMatrix> validation, const TrainConfig& config)
{
    config.validate();
    if (train.empty())
        throw ParameterError("training set is empty");
    const auto M = static_cast<std::size_t>(train.front().rows());
    const auto columns = static_cast<std::size_t>(train.front().cols());
    if (columns < 2)
        throw DimensionError("channels need at least two columns");

    Rng rng(config.seed);
    TrainResult result;
    result.model.phase = PhaseLayer::random(columns - 1, config.allocations, rng, config.lock_first_row);
    result.model.cnn = make_cnn(M, config.allocations, columns, config.arch, rng);

    Adam adam(config.learning_rate, config.beta1, config.beta2, config.adam_eps);
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const double norm = static_cast<double>(M * columns);
    std::uniform_real_distribution<double> snr_draw(config.snr_db, config.snr_max_db.value_or(config.snr_db));

    std::vector<CMatrix> H, N;
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t first = 0; first < order.size(); first += config.batch_size) {
            const std::size_t B = std::min(config.batch_size, order.size() - first);
            const double snr = config.snr_max_db ? snr_draw(rng) : config.snr_db;
            const double noise_variance = snr_to_noise_variance(snr);
            H.resize(B);
            N.resize(B);
            for (std::size_t b = 0; b < B; ++b) {
                H[b] = train[order[first + b]];
                N[b] = draw_noise(M, config.allocations, noise_variance, rng);
            }
            BatchEvaluation ev = evaluate_batch(result.model, H, N, Mode::training);
            if (!std::isfinite(ev.loss))
                throw TrainingError("training loss became non-finite in epoch " + std::to_string(epoch),
                                    static_cast<int>(epoch));
            const auto params = parameter_spans(result.model);
            const auto grads = gradient_spans(result.model, ev);
            adam.step(params, grads);
            update_running_stats(result.model.cnn, ev.cache);
            loss_sum += ev.loss;
            ++batches;
        }
        EpochLog row;
        row.epoch = epoch;
        row.train_loss = loss_sum / static_cast<double>(batches) / norm;
        row.val_nmse = validation.empty()
                           ? std::numeric_limits<double>::quiet_NaN()
                           : evaluate_nmse(result.model, validation, config.snr_db,
                                           derive_seed(config.seed, validation_stream));
        if (!validation.empty() && !std::isfinite(row.val_nmse))
            throw TrainingError("validation NMSE became non-finite in epoch " + std::to_string(epoch),
                                static_cast<int>(epoch));
        result.log.push_back(row);
        adam.set_learning_rate(adam.learning_rate() * config.lr_decay);
    }
    return result;
}

void HyperRanges::validate() const
{
    if (batch_log2_min > batch_log2_max || batch_log2_max > 20)
        throw ParameterError("invalid batch size range");
    if (!(lr_min > 0.0) || !(lr_max >= lr_min))
        throw ParameterError("invalid learning rate range");
    if (activations.empty())
        throw ParameterError("no activation functions to choose from");
    if (kernels_min < 1 || kernels_min > kernels_max)
        throw ParameterError("invalid kernel count range");
    if (layers_min < 1 || layers_min > layers_max)
        throw ParameterError("invalid layer count range");
}

TrainConfig sample_config(const TrainConfig& base, const HyperRanges& ranges, Rng& rng)
{
    ranges.validate();
    TrainConfig cfg = base;
    std::uniform_int_distribution<std::size_t> batch_exp(ranges.batch_log2_min, ranges.batch_log2_max);
    std::uniform_real_distribution<double> log_lr(std::log(ranges.lr_min), std::log(ranges.lr_max));
    std::uniform_int_distribution<std::size_t> act(0, ranges.activations.size() - 1);
    std::uniform_int_distribution<int> coin(0, 1);
    std::uniform_int_distribution<std::size_t> kernels(ranges.kernels_min, ranges.kernels_max);
    std::uniform_int_distribution<std::size_t> layers(ranges.layers_min, ranges.layers_max);
    cfg.batch_size = std::size_t{1} << batch_exp(rng);
    cfg.learning_rate = std::exp(log_lr(rng));
    cfg.arch.activation = ranges.activations[act(rng)];
    cfg.arch.batch_norm = ranges.allow_batch_norm && coin(rng) == 1;
    cfg.arch.kernels = kernels(rng);
    cfg.arch.layers = layers(rng);
    return cfg;
}

HyperSearchResult hyper_search(std::span<const CMatrix> train, std::span<const CMatrix> validation,
                               const TrainConfig& base, const HyperRanges& ranges, std::size_t trials,
                               std::uint64_t seed, const Trainer& trainer)
{
    if (trials < 1)
        throw ParameterError("hyper-parameter search needs at least one trial");
    HyperSearchResult out;
    bool have_best = false;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < trials; ++t) {
        Rng rng(derive_seed(seed, t));
        Trial trial;
        trial.config = sample_config(base, ranges, rng);
        trial.config.seed = derive_seed(seed, trials + t);
        try {
            TrainResult r = trainer(train, validation, trial.config);
            if (r.log.empty())
                throw TrainingError("trainer returned an empty log", 0);
            const auto& last = r.log.back();
            trial.val_nmse = std::isnan(last.val_nmse) ? last.train_loss : last.val_nmse;
            if (!std::isfinite(trial.val_nmse))
                throw TrainingError("non-finite validation NMSE", static_cast<int>(last.epoch));
            if (trial.val_nmse < best) {
                best = trial.val_nmse;
                out.best = std::move(r);
                out.best_config = trial.config;
                have_best = true;
            }
        } catch (const TrainingError& e) {
            trial.failed = true;
            trial.failure = e.what();
        }
        out.trials.push_back(std::move(trial));
    }
    if (!have_best)
        throw TrainingError("all " + std::to_string(trials) + " hyper-parameter trials diverged", -1);
    return out;
}

PhaseMatrix export_phases(const PhaseCnnModel& model)
{
    CMatrix V = model.phase.forward();
    if (!model.phase.first_row_locked()) {
        for (Eigen::Index n = 0; n < V.cols(); ++n) {
            const cplx rot = std::conj(V(0, n));
            for (Eigen::Index m = 1; m < V.rows(); ++m)
                V(m, n) = std::polar(1.0, std::arg(V(m, n) * rot));
            V(0, n) = 1.0;
        }
    }
    return PhaseMatrix(std::move(V));
}

} // namespace rispa::learn
