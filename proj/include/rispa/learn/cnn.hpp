// SPDX-License-Identifier: Apache-2.0
//
// rispa: channel estimation with reduced RIS phase allocations

#ifndef RISPA_LEARN_CNN_HPP
#define RISPA_LEARN_CNN_HPP

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rispa/learn/phase_layer.hpp"
#include "rispa/model.hpp"

namespace rispa::learn {

enum class Activation : std::uint8_t { identity = 0, relu = 1, tanh = 2, sigmoid = 3, silu = 4, elu = 5 };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

// Batch of feature maps, stored channel-major: index ((c * batch + b) * rows + r) * cols + w.
// Channel-major layout lets a convolution be one GEMM over all batch positions.
struct Planes {
    std::size_t channels = 0;
    std::size_t batch = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Planes() = default;
    Planes(std::size_t c, std::size_t b, std::size_t r, std::size_t w)
        : channels(c), batch(b), rows(r), cols(w), data(c * b * r * w, 0.0) {}

    double& at(std::size_t c, std::size_t b, std::size_t r, std::size_t w)
    {
        return data[((c * batch + b) * rows + r) * cols + w];
    }
    double at(std::size_t c, std::size_t b, std::size_t r, std::size_t w) const
    {
        return data[((c * batch + b) * rows + r) * cols + w];
    }
    std::size_t positions() const noexcept { return batch * rows * cols; }
};

// Stacks real and imaginary parts of complex matrices into a 2-channel batch.
Planes to_planes(std::span<const CMatrix> batch);
std::vector<CMatrix> from_planes(const Planes& planes);

struct BatchNorm {
    std::vector<double> scale;
    std::vector<double> shift;
    std::vector<double> running_mean;
    std::vector<double> running_var;
    double momentum = 0.1;
    double eps = 1e-5;
};

// 3x3 convolution, stride 1, zero "same" padding, followed by optional
// batch-norm and the activation.
struct ConvLayer {
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    std::vector<double> kernels; // out x in x 3 x 3
    std::vector<double> biases;  // out
    Activation activation = Activation::relu;
    std::optional<BatchNorm> batch_norm;
};

// Final learned stage mapping width N_v to width L+1: a convolution with a
// 3 x N_v kernel (same padding over antennas, none over allocations) whose
// 2 (L+1) output channels are folded into the real/imaginary M x (L+1) planes.
struct ResizeStage {
    std::size_t in_channels = 0;
    std::size_t in_width = 0;  // N_v
    std::size_t out_width = 0; // L+1
    std::vector<double> kernels; // 2 (L+1) x in x 3 x N_v
    std::vector<double> biases;  // 2 (L+1)
};

struct CnnArch {
    std::size_t kernels = 32;
    std::size_t layers = 3; // number of 3x3 conv layers before the resize stage
    Activation activation = Activation::relu;
    bool batch_norm = false;
};

class CnnModel {
public:
    CnnModel() = default;

    std::size_t antennas = 0;
    std::size_t allocations = 0;
    std::size_t columns = 0; // L+1
    double input_scale = 1.0;
    std::vector<ConvLayer> convs;
    ResizeStage resize;

    bool initialized() const noexcept { return antennas > 0 && !convs.empty() && !resize.kernels.empty(); }
    std::size_t parameter_count() const;
};

// He/Glorot-initialized model for M x N_v inputs and M x (L+1) outputs.
CnnModel make_cnn(std::size_t antennas, std::size_t allocations, std::size_t columns, const CnnArch& arch, Rng& rng);

// The jointly trained network: phase layer followed by the CNN estimator.
struct PhaseCnnModel {
    PhaseLayer phase;
    CnnModel cnn;
};

enum class Mode { training, inference };

// Everything the backward pass needs from one forward evaluation.
struct ForwardCache {
    struct Layer {
        std::vector<double> cols;      // im2col of the layer input, (in*9) x P row-major
        std::vector<double> pre;       // conv output before batch-norm / activation
        std::vector<double> normed;    // batch-norm output (pre-activation) when enabled
        std::vector<double> xhat;      // standardized values when batch-norm is enabled
        std::vector<double> inv_std;   // per channel
        std::vector<double> batch_mean;
        std::vector<double> batch_var;
        std::vector<double> out;       // activation output
    };

    Mode mode = Mode::inference;
    std::size_t batch = 0;
    std::vector<Layer> layers;
    std::vector<double> resize_cols; // (in*3*N_v) x (B*M) row-major
    bool valid = false;
};

struct ConvGrad {
    std::vector<double> kernels;
    std::vector<double> biases;
    std::vector<double> bn_scale;
    std::vector<double> bn_shift;
};

struct CnnGradients {
    std::vector<ConvGrad> convs;
    std::vector<double> resize_kernels;
    std::vector<double> resize_biases;
    Planes input; // dLoss / d(unscaled input planes)
};

// Input: 2 x B x M x N_v planes of Y. Output: 2 x B x M x (L+1) planes of Hhat.
Planes cnn_forward(const CnnModel& model, const Planes& input, Mode mode, ForwardCache* cache = nullptr);

// Backpropagates dLoss/dOutput through the cached forward pass.
CnnGradients cnn_backward(const CnnModel& model, const ForwardCache& cache, const Planes& upstream);

// Folds the cached batch statistics into the running batch-norm statistics.
void update_running_stats(CnnModel& model, const ForwardCache& cache);

// Convenience: complex observations in, complex estimates out (inference mode).
std::vector<CMatrix> cnn_estimate(const CnnModel& model, std::span<const CMatrix> observations);

} // namespace rispa::learn

#endif
