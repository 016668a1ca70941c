// SPDX-License-Identifier: Apache-2.0
//
// rispa: channel estimation with reduced RIS phase allocations

#include "rispa/learn/cnn.hpp"

#include <cmath>

#include "rispa/errors.hpp"

namespace rispa::learn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMap = Eigen::Map<RowMat>;
using ConstRowMap = Eigen::Map<const RowMat>;

double sigmoid(double x)
{
    return 1.0 / (1.0 + std::exp(-x));
}

double activate(Activation a, double x)
{
    switch (a) {
    case Activation::identity: return x;
    case Activation::relu: return x > 0.0 ? x : 0.0;
    case Activation::tanh: return std::tanh(x);
    case Activation::sigmoid: return sigmoid(x);
    case Activation::silu: return x * sigmoid(x);
    case Activation::elu: return x > 0.0 ? x : std::expm1(x);
    }
    return x;
}

// derivative given the pre-activation x and the output y
double activate_grad(Activation a, double x, double y)
{
    switch (a) {
    case Activation::identity: return 1.0;
    case Activation::relu: return x > 0.0 ? 1.0 : 0.0;
    case Activation::tanh: return 1.0 - y * y;
    case Activation::sigmoid: return y * (1.0 - y);
    case Activation::silu: {
        const double s = sigmoid(x);
        return s * (1.0 + x * (1.0 - s));
    }
    case Activation::elu: return x > 0.0 ? 1.0 : y + 1.0;
    }
    return 1.0;
}

// (C*9) x (B*H*W) patch matrix for a 3x3 same-padded convolution
void im2col3x3(const std::vector<double>& x, std::size_t C, std::size_t B, std::size_t H, std::size_t W,
               std::vector<double>& cols)
{
    const std::size_t P = B * H * W;
    cols.assign(C * 9 * P, 0.0);
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t kh = 0; kh < 3; ++kh)
            for (std::size_t kw = 0; kw < 3; ++kw) {
                double* row = cols.data() + ((c * 9 + kh * 3 + kw) * P);
                for (std::size_t b = 0; b < B; ++b) {
                    const double* plane = x.data() + (c * B + b) * H * W;
                    for (std::size_t h = 0; h < H; ++h) {
                        const std::ptrdiff_t hs = static_cast<std::ptrdiff_t>(h + kh) - 1;
                        if (hs < 0 || hs >= static_cast<std::ptrdiff_t>(H))
                            continue;
                        double* dst = row + (b * H + h) * W;
                        const double* src = plane + static_cast<std::size_t>(hs) * W;
                        for (std::size_t w = 0; w < W; ++w) {
                            const std::ptrdiff_t ws = static_cast<std::ptrdiff_t>(w + kw) - 1;
                            if (ws >= 0 && ws < static_cast<std::ptrdiff_t>(W))
                                dst[w] = src[ws];
                        }
                    }
                }
            }
}

void col2im3x3(const std::vector<double>& cols, std::size_t C, std::size_t B, std::size_t H, std::size_t W,
               std::vector<double>& dx)
{
    const std::size_t P = B * H * W;
    dx.assign(C * P, 0.0);
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t kh = 0; kh < 3; ++kh)
            for (std::size_t kw = 0; kw < 3; ++kw) {
                const double* row = cols.data() + ((c * 9 + kh * 3 + kw) * P);
                for (std::size_t b = 0; b < B; ++b) {
                    double* plane = dx.data() + (c * B + b) * H * W;
                    for (std::size_t h = 0; h < H; ++h) {
                        const std::ptrdiff_t hs = static_cast<std::ptrdiff_t>(h + kh) - 1;
                        if (hs < 0 || hs >= static_cast<std::ptrdiff_t>(H))
                            continue;
                        const double* src = row + (b * H + h) * W;
                        double* dst = plane + static_cast<std::size_t>(hs) * W;
                        for (std::size_t w = 0; w < W; ++w) {
                            const std::ptrdiff_t ws = static_cast<std::ptrdiff_t>(w + kw) - 1;
                            if (ws >= 0 && ws < static_cast<std::ptrdiff_t>(W))
                                dst[ws] += src[w];
                        }
                    }
                }
            }
}

// (C*3*Wi) x (B*H) patch matrix for the resize stage
void im2col_resize(const std::vector<double>& x, std::size_t C, std::size_t B, std::size_t H, std::size_t Wi,
                   std::vector<double>& cols)
{
    const std::size_t Q = B * H;
    cols.assign(C * 3 * Wi * Q, 0.0);
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t kh = 0; kh < 3; ++kh)
            for (std::size_t n = 0; n < Wi; ++n) {
                double* row = cols.data() + ((c * 3 + kh) * Wi + n) * Q;
                for (std::size_t b = 0; b < B; ++b)
                    for (std::size_t h = 0; h < H; ++h) {
                        const std::ptrdiff_t hs = static_cast<std::ptrdiff_t>(h + kh) - 1;
                        if (hs < 0 || hs >= static_cast<std::ptrdiff_t>(H))
                            continue;
                        row[b * H + h] = x[((c * B + b) * H + static_cast<std::size_t>(hs)) * Wi + n];
                    }
            }
}

void col2im_resize(const std::vector<double>& cols, std::size_t C, std::size_t B, std::size_t H, std::size_t Wi,
                   std::vector<double>& dx)
{
    const std::size_t Q = B * H;
    dx.assign(C * B * H * Wi, 0.0);
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t kh = 0; kh < 3; ++kh)
            for (std::size_t n = 0; n < Wi; ++n) {
                const double* row = cols.data() + ((c * 3 + kh) * Wi + n) * Q;
                for (std::size_t b = 0; b < B; ++b)
                    for (std::size_t h = 0; h < H; ++h) {
                        const std::ptrdiff_t hs = static_cast<std::ptrdiff_t>(h + kh) - 1;
                        if (hs < 0 || hs >= static_cast<std::ptrdiff_t>(H))
                            continue;
                        dx[((c * B + b) * H + static_cast<std::size_t>(hs)) * Wi + n] += row[b * H + h];
                    }
            }
}

void check_input(const CnnModel& model, const Planes& input)
{
    if (!model.initialized())
        throw StateError("CNN model is not initialized");
    if (input.channels != 2 || input.rows != model.antennas || input.cols != model.allocations || input.batch < 1)
        throw DimensionError("CNN input must be 2 x B x " + std::to_string(model.antennas) + " x " +
                             std::to_string(model.allocations));
}

} // namespace

std::string to_string(Activation a)
{
    switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::sigmoid: return "sigmoid";
    case Activation::silu: return "silu";
    case Activation::elu: return "elu";
    }
    return "unknown";
}

Activation activation_from_string(const std::string& name)
{
    for (auto a : {Activation::identity, Activation::relu, Activation::tanh, Activation::sigmoid, Activation::silu,
                   Activation::elu})
        if (to_string(a) == name)
            return a;
    throw ParameterError("unknown activation '" + name + "'");
}

Planes to_planes(std::span<const CMatrix> batch)
{
    if (batch.empty())
        throw ParameterError("empty batch");
    const auto R = static_cast<std::size_t>(batch.front().rows());
    const auto W = static_cast<std::size_t>(batch.front().cols());
    Planes p(2, batch.size(), R, W);
    for (std::size_t b = 0; b < batch.size(); ++b) {
        if (static_cast<std::size_t>(batch[b].rows()) != R || static_cast<std::size_t>(batch[b].cols()) != W)
            throw DimensionError("batch entries have differing shapes");
        for (std::size_t r = 0; r < R; ++r)
            for (std::size_t w = 0; w < W; ++w) {
                const cplx v = batch[b](static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(w));
                p.at(0, b, r, w) = v.real();
                p.at(1, b, r, w) = v.imag();
            }
    }
    return p;
}

std::vector<CMatrix> from_planes(const Planes& planes)
{
    if (planes.channels != 2)
        throw DimensionError("complex planes need exactly two channels");
    std::vector<CMatrix> out(planes.batch, CMatrix(static_cast<Eigen::Index>(planes.rows),
                                                   static_cast<Eigen::Index>(planes.cols)));
    for (std::size_t b = 0; b < planes.batch; ++b)
        for (std::size_t r = 0; r < planes.rows; ++r)
            for (std::size_t w = 0; w < planes.cols; ++w)
                out[b](static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(w)) =
                    cplx(planes.at(0, b, r, w), planes.at(1, b, r, w));
    return out;
}

std::size_t CnnModel::parameter_count() const
{
    std::size_t n = resize.kernels.size() + resize.biases.size();
    for (const auto& l : convs) {
        n += l.kernels.size() + l.biases.size();
        if (l.batch_norm)
            n += l.batch_norm->scale.size() + l.batch_norm->shift.size();
    }
    return n;
}

CnnModel make_cnn(std::size_t antennas, std::size_t allocations, std::size_t columns, const CnnArch& arch, Rng& rng)
{
    if (antennas < 1 || allocations < 1 || columns < 1)
        throw ParameterError("CNN dimensions must be positive");
    if (arch.layers < 1 || arch.kernels < 1)
        throw ParameterError("CNN needs at least one conv layer with at least one kernel");
    CnnModel model;
    model.antennas = antennas;
    model.allocations = allocations;
    model.columns = columns;
    model.input_scale = 1.0 / std::sqrt(static_cast<double>(columns));

    std::normal_distribution<double> g(0.0, 1.0);
    const bool rectifier = arch.activation == Activation::relu || arch.activation == Activation::elu ||
                           arch.activation == Activation::silu;
    std::size_t in = 2;
    for (std::size_t i = 0; i < arch.layers; ++i) {
        ConvLayer layer;
        layer.in_channels = in;
        layer.out_channels = arch.kernels;
        layer.activation = arch.activation;
        const double fan_in = static_cast<double>(in * 9);
        const double stddev = std::sqrt((rectifier ? 2.0 : 1.0) / fan_in);
        layer.kernels.resize(arch.kernels * in * 9);
        for (auto& w : layer.kernels)
            w = stddev * g(rng);
        layer.biases.assign(arch.kernels, 0.0);
        if (arch.batch_norm) {
            BatchNorm bn;
            bn.scale.assign(arch.kernels, 1.0);
            bn.shift.assign(arch.kernels, 0.0);
            bn.running_mean.assign(arch.kernels, 0.0);
            bn.running_var.assign(arch.kernels, 1.0);
            layer.batch_norm = std::move(bn);
        }
        model.convs.push_back(std::move(layer));
        in = arch.kernels;
    }
    model.resize.in_channels = in;
    model.resize.in_width = allocations;
    model.resize.out_width = columns;
    const double stddev = std::sqrt(1.0 / static_cast<double>(in * 3 * allocations));
    model.resize.kernels.resize(2 * columns * in * 3 * allocations);
    for (auto& w : model.resize.kernels)
        w = stddev * g(rng);
    model.resize.biases.assign(2 * columns, 0.0);
    return model;
}

Planes cnn_forward(const CnnModel& model, const Planes& input, Mode mode, ForwardCache* cache)
{
    check_input(model, input);
    const std::size_t B = input.batch;
    const std::size_t H = model.antennas;
    const std::size_t W = model.allocations;
    const std::size_t P = B * H * W;

    ForwardCache local;
    ForwardCache& fc = cache ? *cache : local;
    fc.mode = mode;
    fc.batch = B;
    fc.valid = false;
    fc.layers.assign(model.convs.size(), {});

    std::vector<double> x(input.data.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        x[i] = input.data[i] * model.input_scale;

    std::size_t C = 2;
    for (std::size_t li = 0; li < model.convs.size(); ++li) {
        const ConvLayer& layer = model.convs[li];
        auto& lc = fc.layers[li];
        if (layer.in_channels != C)
            throw DimensionError("conv layer " + std::to_string(li) + " expects " + std::to_string(layer.in_channels) +
                                 " input channels, got " + std::to_string(C));
        im2col3x3(x, C, B, H, W, lc.cols);
        const std::size_t O = layer.out_channels;
        lc.pre.resize(O * P);
        RowMap pre(lc.pre.data(), static_cast<Eigen::Index>(O), static_cast<Eigen::Index>(P));
        const ConstRowMap k(layer.kernels.data(), static_cast<Eigen::Index>(O), static_cast<Eigen::Index>(C * 9));
        const ConstRowMap cols(lc.cols.data(), static_cast<Eigen::Index>(C * 9), static_cast<Eigen::Index>(P));
        pre.noalias() = k * cols;
        for (std::size_t o = 0; o < O; ++o)
            pre.row(static_cast<Eigen::Index>(o)).array() += layer.biases[o];

        const std::vector<double>* act_in = &lc.pre;
        if (layer.batch_norm) {
            const BatchNorm& bn = *layer.batch_norm;
            lc.normed.resize(O * P);
            lc.xhat.resize(O * P);
            lc.inv_std.resize(O);
            lc.batch_mean.resize(O);
            lc.batch_var.resize(O);
            for (std::size_t o = 0; o < O; ++o) {
                const double* z = lc.pre.data() + o * P;
                double mean, var;
                if (mode == Mode::training) {
                    mean = 0.0;
                    for (std::size_t p = 0; p < P; ++p)
                        mean += z[p];
                    mean /= static_cast<double>(P);
                    var = 0.0;
                    for (std::size_t p = 0; p < P; ++p)
                        var += (z[p] - mean) * (z[p] - mean);
                    var /= static_cast<double>(P);
                } else {
                    mean = bn.running_mean[o];
                    var = bn.running_var[o];
                }
                lc.batch_mean[o] = mean;
                lc.batch_var[o] = var;
                const double inv = 1.0 / std::sqrt(var + bn.eps);
                lc.inv_std[o] = inv;
                for (std::size_t p = 0; p < P; ++p) {
                    const double xh = (z[p] - mean) * inv;
                    lc.xhat[o * P + p] = xh;
                    lc.normed[o * P + p] = bn.scale[o] * xh + bn.shift[o];
                }
            }
            act_in = &lc.normed;
        }
        lc.out.resize(O * P);
        for (std::size_t i = 0; i < O * P; ++i)
            lc.out[i] = activate(layer.activation, (*act_in)[i]);
        x = lc.out;
        C = O;
    }

    const ResizeStage& rs = model.resize;
    if (rs.in_channels != C || rs.in_width != W)
        throw DimensionError("resize stage does not match the conv stack output");
    const std::size_t Q = B * H;
    const std::size_t O = 2 * rs.out_width;
    im2col_resize(x, C, B, H, W, fc.resize_cols);
    RowMat out(static_cast<Eigen::Index>(O), static_cast<Eigen::Index>(Q));
    const ConstRowMap k(rs.kernels.data(), static_cast<Eigen::Index>(O), static_cast<Eigen::Index>(C * 3 * W));
    const ConstRowMap cols(fc.resize_cols.data(), static_cast<Eigen::Index>(C * 3 * W), static_cast<Eigen::Index>(Q));
    out.noalias() = k * cols;

    Planes result(2, B, H, rs.out_width);
    for (std::size_t part = 0; part < 2; ++part)
        for (std::size_t l = 0; l < rs.out_width; ++l) {
            const std::size_t o = part * rs.out_width + l;
            for (std::size_t b = 0; b < B; ++b)
                for (std::size_t h = 0; h < H; ++h)
                    result.at(part, b, h, l) =
                        out(static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(b * H + h)) + rs.biases[o];
        }
    fc.valid = true;
    return result;
}

CnnGradients cnn_backward(const CnnModel& model, const ForwardCache& cache, const Planes& upstream)
{
    if (!cache.valid)
        throw StateError("cnn_backward called without a cached forward pass");
    if (!model.initialized())
        throw StateError("CNN model is not initialized");
    const std::size_t B = cache.batch;
    const std::size_t H = model.antennas;
    const std::size_t W = model.allocations;
    const std::size_t P = B * H * W;
    const ResizeStage& rs = model.resize;
    if (upstream.channels != 2 || upstream.batch != B || upstream.rows != H || upstream.cols != rs.out_width)
        throw DimensionError("upstream gradient shape does not match the forward output");

    CnnGradients grads;
    grads.convs.resize(model.convs.size());

    // resize stage
    const std::size_t Q = B * H;
    const std::size_t O = 2 * rs.out_width;
    std::size_t C = rs.in_channels;
    RowMat dout(static_cast<Eigen::Index>(O), static_cast<Eigen::Index>(Q));
    for (std::size_t part = 0; part < 2; ++part)
        for (std::size_t l = 0; l < rs.out_width; ++l)
            for (std::size_t b = 0; b < B; ++b)
                for (std::size_t h = 0; h < H; ++h)
                    dout(static_cast<Eigen::Index>(part * rs.out_width + l), static_cast<Eigen::Index>(b * H + h)) =
                        upstream.at(part, b, h, l);
    grads.resize_biases.resize(O);
    for (std::size_t o = 0; o < O; ++o)
        grads.resize_biases[o] = dout.row(static_cast<Eigen::Index>(o)).sum();
    grads.resize_kernels.resize(rs.kernels.size());
    {
        const ConstRowMap cols(cache.resize_cols.data(), static_cast<Eigen::Index>(C * 3 * W),
                               static_cast<Eigen::Index>(Q));
        RowMap dk(grads.resize_kernels.data(), static_cast<Eigen::Index>(O), static_cast<Eigen::Index>(C * 3 * W));
        dk.noalias() = dout * cols.transpose();
    }
    std::vector<double> dcols(C * 3 * W * Q);
    {
        const ConstRowMap k(rs.kernels.data(), static_cast<Eigen::Index>(O), static_cast<Eigen::Index>(C * 3 * W));
        RowMap dc(dcols.data(), static_cast<Eigen::Index>(C * 3 * W), static_cast<Eigen::Index>(Q));
        dc.noalias() = k.transpose() * dout;
    }
    std::vector<double> dx;
    col2im_resize(dcols, C, B, H, W, dx);

    for (std::size_t li = model.convs.size(); li-- > 0;) {
        const ConvLayer& layer = model.convs[li];
        const auto& lc = cache.layers[li];
        ConvGrad& g = grads.convs[li];
        const std::size_t Oc = layer.out_channels;
        const std::size_t Ci = layer.in_channels;

        // through the activation
        const std::vector<double>& act_in = layer.batch_norm ? lc.normed : lc.pre;
        std::vector<double> dz(Oc * P);
        for (std::size_t i = 0; i < Oc * P; ++i)
            dz[i] = dx[i] * activate_grad(layer.activation, act_in[i], lc.out[i]);

        if (layer.batch_norm) {
            const BatchNorm& bn = *layer.batch_norm;
            g.bn_scale.assign(Oc, 0.0);
            g.bn_shift.assign(Oc, 0.0);
            for (std::size_t o = 0; o < Oc; ++o) {
                double* d = dz.data() + o * P;
                const double* xh = lc.xhat.data() + o * P;
                double sum_d = 0.0, sum_dx = 0.0;
                for (std::size_t p = 0; p < P; ++p) {
                    g.bn_shift[o] += d[p];
                    g.bn_scale[o] += d[p] * xh[p];
                }
                const double gamma = bn.scale[o];
                if (cache.mode == Mode::training) {
                    for (std::size_t p = 0; p < P; ++p) {
                        sum_d += d[p] * gamma;
                        sum_dx += d[p] * gamma * xh[p];
                    }
                    const double np = static_cast<double>(P);
                    for (std::size_t p = 0; p < P; ++p)
                        d[p] = lc.inv_std[o] / np * (np * d[p] * gamma - sum_d - xh[p] * sum_dx);
                } else {
                    for (std::size_t p = 0; p < P; ++p)
                        d[p] *= gamma * lc.inv_std[o];
                }
            }
        }

        g.biases.resize(Oc);
        const ConstRowMap dzm(dz.data(), static_cast<Eigen::Index>(Oc), static_cast<Eigen::Index>(P));
        // batch mean cancels the bias exactly
        const bool bias_cancels = layer.batch_norm && cache.mode == Mode::training;
        for (std::size_t o = 0; o < Oc; ++o)
            g.biases[o] = bias_cancels ? 0.0 : dzm.row(static_cast<Eigen::Index>(o)).sum();
        g.kernels.resize(layer.kernels.size());
        const ConstRowMap cols(lc.cols.data(), static_cast<Eigen::Index>(Ci * 9), static_cast<Eigen::Index>(P));
        RowMap dk(g.kernels.data(), static_cast<Eigen::Index>(Oc), static_cast<Eigen::Index>(Ci * 9));
        dk.noalias() = dzm * cols.transpose();

        const ConstRowMap k(layer.kernels.data(), static_cast<Eigen::Index>(Oc), static_cast<Eigen::Index>(Ci * 9));
        dcols.resize(Ci * 9 * P);
        RowMap dc(dcols.data(), static_cast<Eigen::Index>(Ci * 9), static_cast<Eigen::Index>(P));
        dc.noalias() = k.transpose() * dzm;
        col2im3x3(dcols, Ci, B, H, W, dx);
        C = Ci;
    }

    grads.input = Planes(2, B, H, W);
    for (std::size_t i = 0; i < dx.size(); ++i)
        grads.input.data[i] = dx[i] * model.input_scale;
    return grads;
}

void update_running_stats(CnnModel& model, const ForwardCache& cache)
{
    if (!cache.valid || cache.mode != Mode::training)
        return;
    const double P = static_cast<double>(cache.batch * model.antennas * model.allocations);
    for (std::size_t li = 0; li < model.convs.size(); ++li) {
        auto& layer = model.convs[li];
        if (!layer.batch_norm)
            continue;
        BatchNorm& bn = *layer.batch_norm;
        const auto& lc = cache.layers[li];
        for (std::size_t o = 0; o < layer.out_channels; ++o) {
            const double unbiased = P > 1.0 ? lc.batch_var[o] * P / (P - 1.0) : lc.batch_var[o];
            bn.running_mean[o] = (1.0 - bn.momentum) * bn.running_mean[o] + bn.momentum * lc.batch_mean[o];
            bn.running_var[o] = (1.0 - bn.momentum) * bn.running_var[o] + bn.momentum * unbiased;
        }
    }
}

std::vector<CMatrix> cnn_estimate(const CnnModel& model, std::span<const CMatrix> observations)
{
    std::vector<CMatrix> out;
    out.reserve(observations.size());
    constexpr std::size_t chunk = 256;
    for (std::size_t first = 0; first < observations.size(); first += chunk) {
        const std::size_t n = std::min(chunk, observations.size() - first);
        const Planes est = cnn_forward(model, to_planes(observations.subspan(first, n)), Mode::inference);
        for (auto& m : from_planes(est))
            out.push_back(std::move(m));
    }
    return out;
}

} // namespace rispa::learn
